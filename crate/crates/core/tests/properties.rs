mod common;

use std::collections::BTreeSet;

use common::*;
use mdpstab::global::{sigma_zc, CheckMethod, GlobalAnalyzer};
use mdpstab::graph::mec_decomposition;
use mdpstab::hybrid::HybridAnalyzer;
use mdpstab::local::check_local;
use mdpstab::model::{restrict_to_mec, StochasticUpdateStrategy};
use mdpstab::numerics::markov::evaluate_strategy;
use mdpstab::numerics::rational::{int, ratio, Rat};
use mdpstab::numerics::{payoff_intervals, solve_lp, LpStatus};
use mdpstab::pareto::{pareto, CellAnswer, ParetoGridResult, ParetoOptions};
use mdpstab::sim::{simulate, SimConfig};
use mdpstab::zerovar::{zero_global, zero_hybrid, zero_local};
use mdpstab::VarianceKind;
use num_traits::Zero;
use proptest::prelude::*;

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(cfg(200))]

    #[test]
    fn mec_decomposition_matches_brute_force(mdp in arb_mdp(4)) {
        let got: BTreeSet<_> = mec_decomposition(&mdp).into_iter().map(|m| (m.states, m.actions)).collect();
        prop_assert_eq!(got, brute_force_mecs(&mdp));
    }
}

proptest! {
    #![proptest_config(cfg(50))]

    #[test]
    fn sigma_z_realizes_z_exactly(mdp in arb_mdp(4), pick in 0usize..8, k in 0i64..=4) {
        let mecs = mec_decomposition(&mdp);
        let bounds = payoff_intervals(&mdp, &mecs);
        let c = pick % mecs.len();
        let (alpha, beta) = (&bounds[c].alpha, &bounds[c].beta);
        let z = alpha + (beta - alpha) * ratio(k, 4);
        let sub = restrict_to_mec(&mdp, &mecs[c]).unwrap();
        let sigma = sigma_zc(&sub.mdp, &z).unwrap().into_stochastic_update();
        for s in 0..sub.mdp.num_states() {
            let a = evaluate_strategy(&sub.mdp, &sigma, s).unwrap();
            prop_assert_eq!(&a.expectation, &z);
            prop_assert!(a.variance.is_zero());
        }
    }

    #[test]
    fn lp_solver_matches_vertex_enumeration(p in arb_small_lp()) {
        let out = solve_lp(&p.to_lp());
        match p.vertex_oracle() {
            None => prop_assert_eq!(out.status, LpStatus::Infeasible),
            Some(best) => {
                prop_assert_eq!(out.status, LpStatus::Optimal);
                prop_assert_eq!(out.objective_value.as_ref(), Some(&best));
                prop_assert!(p.to_lp().is_satisfied_by(&out.assignment));
            }
        }
    }
}

fn assert_decomposition(s: &StochasticUpdateStrategy, mdp: &mdpstab::model::Mdp) -> Result<(), TestCaseError> {
    let a = evaluate_strategy(mdp, s, mdp.initial()).unwrap();
    prop_assert_eq!(&a.hybrid_variance, &(&a.variance + &a.local_variance));
    prop_assert_eq!(&a.hybrid_variance, &(&a.square_payoff - &a.expectation * &a.expectation));
    prop_assert!(a.variance >= Rat::zero());
    prop_assert!(a.local_variance >= Rat::zero());
    prop_assert!(a.hybrid_variance >= a.variance && a.hybrid_variance >= a.local_variance);
    Ok(())
}

proptest! {
    #![proptest_config(cfg(100))]

    #[test]
    fn hybrid_is_global_plus_local(mdp in arb_mdp(4), w in weight_bytes()) {
        assert_decomposition(&memoryless_from(&mdp, &w).into_stochastic_update(), &mdp)?;
        assert_decomposition(&two_memory_from(&mdp, &w), &mdp)?;
    }

    #[test]
    fn strategy_files_round_trip(mdp in arb_mdp(3), w in weight_bytes()) {
        let s = two_memory_from(&mdp, &w);
        let back = StochasticUpdateStrategy::from_json_str(&mdp, &s.to_json_string(&mdp)).unwrap();
        prop_assert_eq!(
            evaluate_strategy(&mdp, &back, 0).unwrap(),
            evaluate_strategy(&mdp, &s, 0).unwrap()
        );
    }
}

proptest! {
    #![proptest_config(cfg(40))]

    /// Yes answers are re-verified on the witness; points achieved by a
    /// random strategy (plus slack for the global grid) are found.
    #[test]
    fn global_check_is_sound_and_grid_complete(mdp in arb_mdp(3), w in weight_bytes(), du in 0i64..4, dv in 0i64..4) {
        let eps = ratio(1, 2);
        let s = memoryless_from(&mdp, &w).into_stochastic_update();
        let a = evaluate_strategy(&mdp, &s, 0).unwrap();
        let an = GlobalAnalyzer::new(&mdp, 0);

        let (u, v) = (&a.expectation + &eps, &a.variance + &eps);
        let ans = an.check(&u, &v, &eps, CheckMethod::Hull).unwrap();
        prop_assert!(ans.is_yes());

        let (u, v) = (&a.expectation - ratio(du, 2), &a.variance - ratio(dv, 3));
        for method in [CheckMethod::Hull, CheckMethod::MeanSweep] {
            if let Some(wit) = an.check(&u, &v, &eps, method).unwrap().witness() {
                let b = evaluate_strategy(&mdp, &wit.strategy, 0).unwrap();
                prop_assert!(b.expectation <= u && b.variance <= v);
                prop_assert_eq!(&b.expectation, &wit.expectation);
                prop_assert_eq!(&b.variance, &wit.variance);
            }
        }
    }

    #[test]
    fn hybrid_check_is_exact_and_monotone(mdp in arb_mdp(3), w in weight_bytes(), du in 0i64..4, dv in 0i64..4) {
        let eps = ratio(1, 100);
        let s = two_memory_from(&mdp, &w);
        let a = evaluate_strategy(&mdp, &s, 0).unwrap();
        let an = HybridAnalyzer::new(&mdp, 0);
        prop_assert!(an.check(&a.expectation, &a.hybrid_variance, &eps, CheckMethod::Hull).unwrap().is_yes());

        let (u, v) = (&a.expectation - ratio(du, 2), &a.hybrid_variance - ratio(dv, 3));
        let ans = an.check(&u, &v, &eps, CheckMethod::Hull).unwrap();
        if let Some(wit) = ans.witness() {
            let b = evaluate_strategy(&mdp, &wit.strategy, 0).unwrap();
            prop_assert!(b.expectation <= u && b.hybrid_variance <= v);
            let bigger = an.check(&(&u + int(1)), &(&v + ratio(1, 2)), &eps, CheckMethod::Hull).unwrap();
            prop_assert!(bigger.is_yes());
        }
        let sweep = an.check(&u, &v, &eps, CheckMethod::MeanSweep).unwrap();
        if let Some(wit) = sweep.witness() {
            let b = evaluate_strategy(&mdp, &wit.strategy, 0).unwrap();
            prop_assert!(b.expectation <= u && b.hybrid_variance <= v);
        }
    }

    #[test]
    fn local_check_is_exact(mdp in arb_mdp(3), w in weight_bytes(), du in 0i64..4, dv in 0i64..4) {
        let s = memoryless_from(&mdp, &w).into_stochastic_update();
        let a = evaluate_strategy(&mdp, &s, 0).unwrap();
        prop_assert!(check_local(&mdp, 0, &a.expectation, &a.local_variance, None).unwrap().is_yes());

        let (u, v) = (&a.expectation - ratio(du, 2), &a.local_variance - ratio(dv, 3));
        if let Some(wit) = check_local(&mdp, 0, &u, &v, None).unwrap().witness() {
            let b = evaluate_strategy(&mdp, &wit.strategy, 0).unwrap();
            prop_assert!(b.expectation <= u && b.local_variance <= v);
            prop_assert_eq!(&b.expectation, &wit.expectation);
            prop_assert_eq!(&b.local_variance, &wit.local_variance);
        }
    }

    #[test]
    fn zero_variance_witnesses_and_ordering(mdp in arb_mdp(4)) {
        for s in 0..mdp.num_states() {
            let h = zero_hybrid(&mdp, s);
            let l = zero_local(&mdp, s).unwrap();
            let g = zero_global(&mdp, s).unwrap();
            for (ans, kind) in [(&h, VarianceKind::Hybrid), (&l, VarianceKind::Local), (&g, VarianceKind::Global)] {
                prop_assert_eq!(ans.value.is_some(), ans.witness.is_some());
                if let (Some(val), Some(wit)) = (&ans.value, &ans.witness) {
                    let a = evaluate_strategy(&mdp, wit, s).unwrap();
                    prop_assert_eq!(&a.expectation, val);
                    let var = match kind {
                        VarianceKind::Hybrid => &a.hybrid_variance,
                        VarianceKind::Local => &a.local_variance,
                        VarianceKind::Global => &a.variance,
                    };
                    prop_assert!(var.is_zero());
                }
            }
            if let Some(hv) = &h.value {
                prop_assert!(l.value.as_ref().is_some_and(|lv| lv <= hv));
                prop_assert!(g.value.as_ref().is_some_and(|gv| gv <= hv));
            }
        }
    }
}

proptest! {
    #![proptest_config(cfg(12))]

    #[test]
    fn pareto_grids_are_witnessed_monotone_and_round_trip(
        spec in arb_mdp_spec(3, 2, 0..=2),
        kind in prop_oneof![Just(VarianceKind::Global), Just(VarianceKind::Local), Just(VarianceKind::Hybrid)],
    ) {
        let mdp = build_mdp(&spec);
        let eps = int(1);
        let grid = pareto(&mdp, 0, kind, &eps, &ParetoOptions { pair_budget: None, threads: Some(2) }).unwrap();
        for c in &grid.cells {
            if c.answer == CellAnswer::Yes {
                let a = evaluate_strategy(&mdp, &grid.witnesses[c.witness.unwrap()], 0).unwrap();
                let var = match kind {
                    VarianceKind::Hybrid => &a.hybrid_variance,
                    VarianceKind::Local => &a.local_variance,
                    VarianceKind::Global => &a.variance,
                };
                prop_assert!(a.expectation <= c.u && *var <= c.v);
            }
        }
        for pair in grid.staircase.windows(2) {
            prop_assert!(pair[0].u < pair[1].u && pair[0].v > pair[1].v);
        }
        let from_json = ParetoGridResult::from_json(&grid.to_json()).unwrap();
        prop_assert_eq!(&from_json.cells, &grid.cells);
        prop_assert_eq!(&from_json.staircase, &grid.staircase);
        let from_csv = ParetoGridResult::from_csv(&grid.to_csv(), kind, eps).unwrap();
        prop_assert_eq!(&from_csv.cells, &grid.cells);
        prop_assert_eq!(&from_csv.staircase, &grid.staircase);
    }

    #[test]
    fn simulation_is_reproducible(mdp in arb_mdp(3), w in weight_bytes(), seed in any::<u64>()) {
        let s = two_memory_from(&mdp, &w);
        let cfg = SimConfig::new(20, 50, seed);
        let a = simulate(&mdp, &s, 0, &cfg);
        let b = simulate(&mdp, &s, 0, &cfg);
        prop_assert_eq!(a, b);
    }
}
