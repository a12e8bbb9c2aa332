//! Hybrid variance: squared deviation of every step reward from the
//! expected mean payoff, averaged over the run.
//!
//! With recurrent frequencies `x`, the expectation is `E = Σ x_a·r(a)` and
//! the hybrid variance is `Q − E²` with `Q = Σ x_a·r(a)²`. Both forms are
//! linear in the flow polytope, so one lower hull of `(E, Q)` answers every
//! query exactly.

use std::collections::BTreeSet;

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::flow::{support_components, two_phase_strategy, FlowSystem, FrequencySolution};
use crate::global::grid_step;
use crate::model::{normalize, point_dist, Dist, Mdp, StochasticUpdateStrategy};
use crate::numerics::hull::{lower_hull_of_lp, minimize_on_lower_hull, mix, HullChoice, HullPoint};
use crate::numerics::lp::{solve_lp, LinearProgram, Relation};
use crate::numerics::markov::evaluate_strategy;
use crate::numerics::rational::{format_rational, ratio, serde_rat, to_f64, Rat};
use crate::sim::{simulate_with_reference, SimConfig};
use crate::{Error, Result};

pub use crate::global::CheckMethod;

/// Default approximation parameter.
pub fn default_eps() -> Rat {
    ratio(1, 100)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HybridWitness {
    /// Expectation of the chosen flow point.
    #[serde(with = "serde_rat")]
    pub mean_pivot: Rat,
    #[serde(skip)]
    pub solution: FrequencySolution,
    #[serde(with = "serde_rat")]
    pub expectation: Rat,
    #[serde(with = "serde_rat")]
    pub hybrid_variance: Rat,
    #[serde(skip)]
    pub strategy: StochasticUpdateStrategy,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HybridAnswer {
    Yes(Box<HybridWitness>),
    No,
}

impl HybridAnswer {
    pub fn is_yes(&self) -> bool {
        matches!(self, HybridAnswer::Yes(_))
    }

    pub fn witness(&self) -> Option<&HybridWitness> {
        match self {
            HybridAnswer::Yes(w) => Some(w),
            HybridAnswer::No => None,
        }
    }
}

/// Flow system with recurrent frequencies plus the two reward rows.
#[derive(Debug, Clone)]
pub struct SystemLh {
    pub flow: FlowSystem,
    /// `Σ x_a·r(a)`
    pub e_row: Vec<(usize, Rat)>,
    /// `Σ x_a·r(a)²`, entering the variance bound as `Q − E² ≤ v`.
    pub q_row: Vec<(usize, Rat)>,
}

impl SystemLh {
    /// Linear part with `E ≤ u`; the quadratic bound stays symbolic.
    pub fn with_bound(&self, u: &Rat) -> LinearProgram {
        let mut lp = self.flow.lp.clone();
        lp.add_constraint(self.e_row.clone(), Relation::Le, u.clone());
        lp
    }
}

pub fn build_system_lh(mdp: &Mdp, start: usize) -> SystemLh {
    let flow = FlowSystem::with_recurrent(mdp, start);
    let e_row = flow.x_row(|a| mdp.reward(a).clone());
    let q_row = flow.x_row(|a| mdp.reward(a) * mdp.reward(a));
    SystemLh { flow, e_row, q_row }
}

/// Cached hull for one (MDP, start); answers queries without new LP solves.
#[derive(Debug, Clone)]
pub struct HybridAnalyzer<'a> {
    mdp: &'a Mdp,
    start: usize,
    system: SystemLh,
    hull: Vec<HullPoint<Vec<Rat>>>,
}

impl<'a> HybridAnalyzer<'a> {
    pub fn new(mdp: &'a Mdp, start: usize) -> Self {
        let system = build_system_lh(mdp, start);
        let hull = lower_hull_of_lp(&system.flow.lp, &system.e_row, &system.q_row);
        HybridAnalyzer { mdp, start, system, hull }
    }

    pub fn system(&self) -> &SystemLh {
        &self.system
    }

    pub fn hull(&self) -> &[HullPoint<Vec<Rat>>] {
        &self.hull
    }

    /// Least hybrid variance with expectation at most `u`, if any.
    pub fn decide(&self, u: &Rat, v: &Rat) -> Option<HullChoice> {
        minimize_on_lower_hull(&self.hull, u, |e, q| q - e * e).filter(|c| c.value <= *v)
    }

    pub fn witness_from_choice(&self, choice: &HullChoice) -> Result<HybridWitness> {
        let assignment = mix(&self.hull[choice.left].payload, &self.hull[choice.right].payload, &choice.lambda);
        self.witness(choice.e.clone(), &assignment)
    }

    fn witness(&self, mean_pivot: Rat, assignment: &[Rat]) -> Result<HybridWitness> {
        let solution = self.system.flow.solution(assignment);
        let strategy = synthesize_hybrid(self.mdp, self.start, &solution)?;
        let analysis = evaluate_strategy(self.mdp, &strategy, self.start)?;
        Ok(HybridWitness {
            mean_pivot,
            solution,
            expectation: analysis.expectation,
            hybrid_variance: analysis.hybrid_variance,
            strategy,
        })
    }

    pub fn check(&self, u: &Rat, v: &Rat, eps: &Rat, method: CheckMethod) -> Result<HybridAnswer> {
        let tau = grid_step(self.mdp, eps)?;
        match method {
            CheckMethod::Hull => match self.decide(u, v) {
                Some(choice) => self.verified(self.witness_from_choice(&choice)?, u, v),
                None => Ok(HybridAnswer::No),
            },
            CheckMethod::MeanSweep => self.check_sweep(u, v, &tau),
        }
    }

    /// Pins `μ − τ ≤ E ≤ min(μ + τ, u)` and `Q ≤ v + min{E² : |E − μ| ≤ τ}`
    /// for every `μ` on the `τ`-grid in `[min r, max r]`.
    fn check_sweep(&self, u: &Rat, v: &Rat, tau: &Rat) -> Result<HybridAnswer> {
        let lo = self.mdp.min_reward();
        let hi = self.mdp.max_reward();
        let mut k = (&lo / tau).floor().to_integer();
        loop {
            let mu = Rat::from_integer(k.clone()) * tau;
            if mu > &hi + tau || &mu - tau > *u {
                return Ok(HybridAnswer::No);
            }
            let (a, b) = (&mu - tau, &mu + tau);
            let lower = if a.is_positive() {
                &a * &a
            } else if b.is_negative() {
                &b * &b
            } else {
                Rat::zero()
            };
            let mut lp = self.system.flow.lp.clone();
            lp.add_constraint(self.system.e_row.clone(), Relation::Ge, a);
            lp.add_constraint(self.system.e_row.clone(), Relation::Le, b.min(u.clone()));
            lp.add_constraint(self.system.q_row.clone(), Relation::Le, v + lower);
            let out = solve_lp(&lp);
            if out.is_feasible() {
                let w = self.witness(mu, &out.assignment)?;
                return self.verified(w, u, v);
            }
            k += 1;
        }
    }

    fn verified(&self, w: HybridWitness, u: &Rat, v: &Rat) -> Result<HybridAnswer> {
        if w.expectation > *u || w.hybrid_variance > *v {
            return Err(Error::InfeasibleWitness(format!(
                "hybrid witness realizes ({}, {}) which exceeds ({}, {})",
                format_rational(&w.expectation),
                format_rational(&w.hybrid_variance),
                format_rational(u),
                format_rational(v)
            )));
        }
        Ok(HybridAnswer::Yes(Box::new(w)))
    }
}

/// Decides whether expectation at most `u` and hybrid variance at most `v`
/// can be achieved from `start`. The hull answer is exact, which meets the
/// `eps` contract; `eps` is still validated.
pub fn approx_check_hybrid(mdp: &Mdp, start: usize, u: &Rat, v: &Rat, eps: &Rat) -> Result<HybridAnswer> {
    HybridAnalyzer::new(mdp, start).check(u, v, eps, CheckMethod::Hull)
}

pub fn approx_check_hybrid_with(
    mdp: &Mdp,
    start: usize,
    u: &Rat,
    v: &Rat,
    eps: &Rat,
    method: CheckMethod,
) -> Result<HybridAnswer> {
    HybridAnalyzer::new(mdp, start).check(u, v, eps, method)
}

/// 2-memory strategy realizing the recurrent frequencies of `solution`.
///
/// The support of `x` splits into closed pieces. The transient part is
/// re-solved so that each piece receives exactly its `x` mass, committing
/// only in states of that piece; in `m2` the strategy plays `∝ x`.
pub fn synthesize_hybrid(mdp: &Mdp, start: usize, solution: &FrequencySolution) -> Result<StochasticUpdateStrategy> {
    let x = &solution.x_action;
    if x.len() != mdp.num_actions() || x.iter().any(|v| v.is_negative()) {
        return Err(Error::InfeasibleSolution("recurrent frequencies malformed or negative".into()));
    }
    if x.iter().sum::<Rat>() != Rat::one() {
        return Err(Error::InfeasibleSolution("recurrent frequencies do not sum to 1".into()));
    }
    let pieces = support_components(mdp, x);
    let transient = FlowSystem::transient(mdp, start);
    let mut lp = transient.lp.clone();
    let mut covered: BTreeSet<usize> = BTreeSet::new();
    for (states, actions) in &pieces {
        let mass: Rat = actions.iter().map(|&a| x[a].clone()).sum();
        let mut row = Vec::new();
        for &s in states {
            let v = transient.y_state[s].ok_or_else(|| {
                Error::InfeasibleSolution(format!("frequency on {} outside every MEC", mdp.state_name(s)))
            })?;
            row.push((v, Rat::one()));
            covered.insert(s);
        }
        lp.add_constraint(row, Relation::Eq, mass);
    }
    for (s, v) in transient.y_state.iter().enumerate() {
        if let Some(v) = v {
            if !covered.contains(&s) {
                lp.add_constraint(vec![(*v, Rat::one())], Relation::Eq, Rat::zero());
            }
        }
    }
    let out = solve_lp(&lp);
    if !out.is_feasible() {
        return Err(Error::InfeasibleSolution("no transient flow reaches the recurrent pieces with their mass".into()));
    }
    let refined = transient.solution(&out.assignment);

    let recurrent: Vec<Dist> = (0..mdp.num_states())
        .map(|s| {
            normalize(mdp.enabled(s).iter().map(|&a| (a, x[a].clone())))
                .unwrap_or_else(|| point_dist(mdp.enabled(s)[0]))
        })
        .collect();
    Ok(two_phase_strategy(mdp, start, &refined.y_state, &refined.y_action, &recurrent))
}

/// Simulated side of a relation check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulatedRelation {
    pub hybrid_variance: f64,
    pub variance: f64,
    pub local_variance: f64,
    /// `3·sqrt(se_hv² + se_var² + se_lv²)`
    pub tolerance: f64,
    pub agree: bool,
}

/// Both sides of `E[hv] = Var[mp] + E[lv]` for one strategy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelationReport {
    #[serde(with = "serde_rat")]
    pub expectation: Rat,
    #[serde(with = "serde_rat")]
    pub hybrid_variance: Rat,
    #[serde(with = "serde_rat")]
    pub variance: Rat,
    #[serde(with = "serde_rat")]
    pub local_variance: Rat,
    pub exact_holds: bool,
    pub simulated: Option<SimulatedRelation>,
}

pub fn check_relation(
    mdp: &Mdp,
    strategy: &StochasticUpdateStrategy,
    start: usize,
    mc: Option<&SimConfig>,
) -> Result<RelationReport> {
    let a = evaluate_strategy(mdp, strategy, start)?;
    let exact_holds = a.hybrid_variance == &a.variance + &a.local_variance;
    let simulated = mc.map(|cfg| {
        let st = simulate_with_reference(mdp, strategy, start, cfg, Some(to_f64(&a.expectation)));
        let tolerance = 3.0
            * (st.hybrid_variance_se.powi(2) + st.variance_se.powi(2) + st.local_variance_se.powi(2)).sqrt();
        let gap = (st.hybrid_variance - st.variance - st.local_variance).abs();
        SimulatedRelation {
            hybrid_variance: st.hybrid_variance,
            variance: st.variance,
            local_variance: st.local_variance,
            tolerance,
            agree: gap <= tolerance.max(1e-9),
        }
    });
    Ok(RelationReport {
        expectation: a.expectation,
        hybrid_variance: a.hybrid_variance,
        variance: a.variance,
        local_variance: a.local_variance,
        exact_holds,
        simulated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{commit_strategy, loop_commit_strategy, m_glob, m_uni, md_strategy};
    use crate::model::MemorylessStrategy;
    use crate::numerics::rational::{int, parse_rational};

    fn q(s: &str) -> Rat {
        parse_rational(s).unwrap()
    }

    #[test]
    fn unichain_queries() {
        let mdp = m_uni();
        let yes = approx_check_hybrid(&mdp, 0, &q("1.55"), &q("0.8"), &q("0.02")).unwrap();
        let w = yes.witness().unwrap();
        assert!(w.expectation <= q("1.55") && w.hybrid_variance <= q("0.8"));
        assert_eq!(w.strategy.memory.len(), 1);
        let no = approx_check_hybrid(&mdp, 0, &q("1.5"), &q("0.70"), &q("0.02")).unwrap();
        assert_eq!(no, HybridAnswer::No);
    }

    #[test]
    fn floor_at_one_and_a_half_is_three_quarters() {
        let mdp = m_uni();
        let h = HybridAnalyzer::new(&mdp, 0);
        let c = minimize_on_lower_hull(h.hull(), &q("1.5"), |e, q| q - e * e).unwrap();
        assert_eq!(c.value, ratio(3, 4));
        assert!(h.decide(&q("1.5"), &ratio(3, 4)).is_some());
    }

    #[test]
    fn sweep_matches_hull_on_unichain() {
        let mdp = m_uni();
        for (u, v, expect) in [("1.55", "0.8", true), ("1.5", "0.7", false), ("2", "0", true), ("0.9", "5", false)] {
            let ans = approx_check_hybrid_with(&mdp, 0, &q(u), &q(v), &q("0.1"), CheckMethod::MeanSweep).unwrap();
            assert_eq!(ans.is_yes(), expect, "({u}, {v})");
        }
    }

    #[test]
    fn quarter_half_frequencies_give_uniform_play() {
        let mdp = m_uni();
        let sol = FrequencySolution {
            y_state: vec![int(1), int(0)],
            y_action: vec![int(0); 3],
            x_action: vec![ratio(1, 4), ratio(1, 4), ratio(1, 2)],
        };
        let s = synthesize_hybrid(&mdp, 0, &sol).unwrap();
        assert_eq!(s.memory.len(), 1);
        assert_eq!(s.next_move(0, 0), &vec![(0, ratio(1, 2)), (1, ratio(1, 2))]);
        let a = evaluate_strategy(&mdp, &s, 0).unwrap();
        assert_eq!((a.expectation, a.hybrid_variance), (ratio(3, 2), ratio(3, 4)));
    }

    #[test]
    fn uniform_strategy_values() {
        let mdp = m_uni();
        let a = evaluate_strategy(&mdp, &MemorylessStrategy::uniform(&mdp).into_stochastic_update(), 0).unwrap();
        assert_eq!((a.expectation, a.hybrid_variance), (ratio(3, 2), ratio(3, 4)));
    }

    #[test]
    fn bad_solutions_are_rejected() {
        let mdp = m_uni();
        let sol = FrequencySolution {
            y_state: vec![int(1), int(0)],
            y_action: vec![int(0); 3],
            x_action: vec![ratio(1, 4), ratio(1, 4), ratio(1, 4)],
        };
        assert!(matches!(synthesize_hybrid(&mdp, 0, &sol), Err(Error::InfeasibleSolution(_))));
    }

    #[test]
    fn m_glob_witness_splits_between_loops() {
        let mdp = m_glob();
        let ans = approx_check_hybrid(&mdp, 0, &int(4), &int(4), &default_eps()).unwrap();
        let w = ans.witness().unwrap();
        assert!(w.expectation <= int(4) && w.hybrid_variance <= int(4));
        assert!(approx_check_hybrid(&mdp, 0, &int(4), &int(1), &default_eps()).unwrap() == HybridAnswer::No);
    }

    #[test]
    fn relation_holds_exactly_on_fixtures() {
        let uni = m_uni();
        let glob = m_glob();
        let r = check_relation(&uni, &commit_strategy(&uni), 0, None).unwrap();
        assert!(r.exact_holds);
        assert_eq!((r.variance, r.local_variance, r.hybrid_variance), (ratio(1, 4), ratio(1, 2), ratio(3, 4)));
        let r = check_relation(&glob, &loop_commit_strategy(&glob), 0, None).unwrap();
        assert_eq!((r.hybrid_variance, r.variance, r.local_variance.clone()), (int(2), int(2), int(0)));
        let det = md_strategy(&uni, &["a", "c"]).to_memoryless().into_stochastic_update();
        let r = check_relation(&uni, &det, 0, Some(&SimConfig::new(200, 200, 5))).unwrap();
        assert_eq!(r.variance, int(0));
        assert_eq!(r.hybrid_variance, r.local_variance);
        assert!(r.simulated.unwrap().agree);
    }
}
