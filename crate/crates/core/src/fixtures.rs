//! The two reference MDPs and a few hand-written strategies on them.
//!
//! `m_glob` has a random first step into a reward-4 loop or a state that can
//! either loop with reward 5 or leave to a reward-0 sink. `m_uni` is a
//! two-state cycle where the first state chooses between rewards 0 and 2.

use std::collections::BTreeMap;

use num_traits::One;

use crate::model::{normalize, point_dist, Mdp, MemorylessDeterministicStrategy, StochasticUpdateStrategy};
use crate::numerics::rational::{ratio, Rat};

pub const M_GLOB_JSON: &str = include_str!("../fixtures/m_glob.json");
pub const M_UNI_JSON: &str = include_str!("../fixtures/m_uni.json");

pub fn m_glob() -> Mdp {
    Mdp::from_json_str(M_GLOB_JSON).expect("bundled fixture is valid")
}

pub fn m_uni() -> Mdp {
    Mdp::from_json_str(M_UNI_JSON).expect("bundled fixture is valid")
}

/// Memoryless deterministic strategy from one action id per state, in state order.
pub fn md_strategy(mdp: &Mdp, actions: &[&str]) -> MemorylessDeterministicStrategy {
    let choice = actions.iter().map(|id| mdp.action_index(id).expect("known action")).collect();
    MemorylessDeterministicStrategy::new(mdp, choice).expect("valid choice")
}

/// On `m_glob`: at the first visit to s3 play c with probability 4/5 and d
/// with 1/5; after one c stay on c forever.
pub fn loop_commit_strategy(mdp: &Mdp) -> StochasticUpdateStrategy {
    let s = |n: &str| mdp.state_index(n).unwrap();
    let a = |n: &str| mdp.action_index(n).unwrap();
    let mut next_move = vec![vec![Vec::new(), Vec::new()]; mdp.num_states()];
    for m in 0..2 {
        next_move[s("s1")][m] = point_dist(a("a"));
        next_move[s("s2")][m] = point_dist(a("b"));
        next_move[s("s4")][m] = point_dist(a("e"));
    }
    next_move[s("s3")][0] = normalize([(a("c"), ratio(4, 5)), (a("d"), ratio(1, 5))]).unwrap();
    next_move[s("s3")][1] = point_dist(a("c"));
    let mut memory_update = BTreeMap::new();
    memory_update.insert((a("c"), s("s3"), 0), point_dist(1));
    StochasticUpdateStrategy {
        memory: vec!["m1".into(), "m2".into()],
        initial_memory: point_dist(0),
        next_move,
        memory_update,
    }
}

/// On `m_uni`: flip a fair coin once, then play b forever or a forever.
pub fn commit_strategy(mdp: &Mdp) -> StochasticUpdateStrategy {
    let s1 = mdp.state_index("s1").unwrap();
    let s2 = mdp.state_index("s2").unwrap();
    let a = |n: &str| mdp.action_index(n).unwrap();
    let mut next_move = vec![vec![Vec::new(), Vec::new()]; 2];
    next_move[s1][0] = point_dist(a("b"));
    next_move[s1][1] = point_dist(a("a"));
    next_move[s2][0] = point_dist(a("c"));
    next_move[s2][1] = point_dist(a("c"));
    StochasticUpdateStrategy {
        memory: vec!["commit-b".into(), "commit-a".into()],
        initial_memory: vec![(0, ratio(1, 2)), (1, ratio(1, 2))],
        next_move,
        memory_update: BTreeMap::new(),
    }
}

/// On `m_uni`: alternate between a and b at s1, starting with a.
pub fn alternating_strategy(mdp: &Mdp) -> StochasticUpdateStrategy {
    let s1 = mdp.state_index("s1").unwrap();
    let s2 = mdp.state_index("s2").unwrap();
    let a = |n: &str| mdp.action_index(n).unwrap();
    let mut next_move = vec![vec![Vec::new(), Vec::new()]; 2];
    next_move[s1][0] = point_dist(a("a"));
    next_move[s1][1] = point_dist(a("b"));
    next_move[s2][0] = point_dist(a("c"));
    next_move[s2][1] = point_dist(a("c"));
    let mut memory_update = BTreeMap::new();
    memory_update.insert((a("c"), s1, 0), point_dist(1));
    memory_update.insert((a("c"), s1, 1), point_dist(0));
    StochasticUpdateStrategy {
        memory: vec!["next-a".into(), "next-b".into()],
        initial_memory: vec![(0, Rat::one())],
        next_move,
        memory_update,
    }
}
