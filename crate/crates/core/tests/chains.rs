mod common;

use std::collections::BTreeSet;

use common::*;
use mdpstab::fixtures::{loop_commit_strategy, m_glob, md_strategy};
use mdpstab::model::induce_chain;
use mdpstab::numerics::markov::evaluate_strategy;
use mdpstab::numerics::rational::{int, Rat};
use num_traits::One;
use proptest::prelude::*;

#[test]
fn memoryless_chain_on_m_glob_skips_the_sink() {
    let mdp = m_glob();
    let s = md_strategy(&mdp, &["a", "b", "c", "e"]).to_memoryless().into_stochastic_update();
    let chain = induce_chain(&mdp, &s, 0);
    let names: BTreeSet<(String, String)> = chain
        .locations
        .iter()
        .map(|l| (mdp.state_name(l.state).to_string(), mdp.action(l.action).id.clone()))
        .collect();
    let expected: BTreeSet<(String, String)> =
        [("s1", "a"), ("s2", "b"), ("s3", "c")].iter().map(|(s, a)| (s.to_string(), a.to_string())).collect();
    assert_eq!(names, expected);
    let a = evaluate_strategy(&mdp, &s, 0).unwrap();
    assert_eq!(a.expectation, Rat::new(9.into(), 2.into()));
    assert_eq!(a.variance, Rat::new(1.into(), 4.into()));
}

#[test]
fn loop_commit_values_are_exact() {
    let mdp = m_glob();
    let a = evaluate_strategy(&mdp, &loop_commit_strategy(&mdp), 0).unwrap();
    assert_eq!(a.expectation, int(4));
    assert_eq!(a.variance, int(2));
    assert_eq!(a.local_variance, int(0));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn induced_chains_are_stochastic(mdp in arb_mdp(4), w in weight_bytes()) {
        let memoryless = memoryless_from(&mdp, &w).into_stochastic_update();
        let chain = induce_chain(&mdp, &memoryless, 0);
        prop_assert!(chain.len() <= mdp.num_states() * mdp.num_actions());
        for s in [memoryless, two_memory_from(&mdp, &w)] {
            let chain = induce_chain(&mdp, &s, 0);
            let total: Rat = chain.initial.iter().map(|(_, p)| p.clone()).sum();
            prop_assert_eq!(total, Rat::one());
            for row in &chain.edges {
                let total: Rat = row.iter().map(|(_, p)| p.clone()).sum();
                prop_assert_eq!(total, Rat::one());
            }
        }
    }
}
