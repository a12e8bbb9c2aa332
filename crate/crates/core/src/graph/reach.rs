use std::collections::BTreeSet;

use super::mec::mec_decomposition_masked;
use crate::model::{Mdp, MemorylessDeterministicStrategy};

/// Winning region of a qualitative objective plus a memoryless pure witness.
/// Outside the winning region the witness picks the first enabled action.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlmostSure {
    pub winning: BTreeSet<usize>,
    pub strategy: MemorylessDeterministicStrategy,
}

impl AlmostSure {
    pub fn wins(&self, s: usize) -> bool {
        self.winning.contains(&s)
    }
}

/// States from which `target` is reached with probability 1.
pub fn almost_sure_reach(mdp: &Mdp, target: &BTreeSet<usize>) -> AlmostSure {
    almost_sure_reach_masked(mdp, target, &vec![true; mdp.num_actions()])
}

/// Almost-sure reachability using only actions with `allowed[a] == true`.
///
/// Outer fixpoint shrinks the candidate set `W`; the inner pass keeps the
/// states that can reach `target` through actions whose successors all stay
/// in `W`. The witness picks, in canonical order, an action that stays in the
/// final `W` and decreases the attractor layer.
pub fn almost_sure_reach_masked(mdp: &Mdp, target: &BTreeSet<usize>, allowed: &[bool]) -> AlmostSure {
    let n = mdp.num_states();
    let is_target: Vec<bool> = (0..n).map(|s| target.contains(&s)).collect();
    let mut candidate = vec![true; n];

    loop {
        let safe = |a: usize, cand: &[bool]| allowed[a] && mdp.action(a).successors().all(|t| cand[t]);
        // states that can reach target with positive probability inside the candidate set
        let mut reach = is_target.clone();
        let mut changed = true;
        while changed {
            changed = false;
            for s in 0..n {
                if reach[s] || !candidate[s] {
                    continue;
                }
                let ok = mdp
                    .enabled(s)
                    .iter()
                    .any(|&a| safe(a, &candidate) && mdp.action(a).successors().any(|t| reach[t]));
                if ok {
                    reach[s] = true;
                    changed = true;
                }
            }
        }
        let next: Vec<bool> = (0..n).map(|s| candidate[s] && reach[s]).collect();
        if next == candidate {
            break;
        }
        candidate = next;
    }

    // attractor layers inside the final candidate set
    let mut layer = vec![usize::MAX; n];
    let mut choice: Vec<Option<usize>> = vec![None; n];
    for s in 0..n {
        if candidate[s] && is_target[s] {
            layer[s] = 0;
        }
    }
    let mut depth = 0;
    loop {
        depth += 1;
        let mut added = Vec::new();
        for s in 0..n {
            if !candidate[s] || layer[s] != usize::MAX {
                continue;
            }
            let pick = mdp.enabled(s).iter().copied().find(|&a| {
                allowed[a]
                    && mdp.action(a).successors().all(|t| candidate[t])
                    && mdp.action(a).successors().any(|t| layer[t] < depth)
            });
            if let Some(a) = pick {
                added.push((s, a));
            }
        }
        if added.is_empty() {
            break;
        }
        for (s, a) in added {
            layer[s] = depth;
            choice[s] = Some(a);
        }
    }

    let winning: BTreeSet<usize> = (0..n).filter(|&s| candidate[s]).collect();
    let strategy = MemorylessDeterministicStrategy {
        choice: (0..n)
            .map(|s| {
                choice[s].unwrap_or_else(|| {
                    // targets and losing states: prefer an allowed action that stays winning
                    mdp.enabled(s)
                        .iter()
                        .copied()
                        .find(|&a| allowed[a] && mdp.action(a).successors().all(|t| candidate[t]))
                        .unwrap_or(mdp.enabled(s)[0])
                })
            })
            .collect(),
    };
    AlmostSure { winning, strategy }
}

/// States from which one can ensure, with probability 1, that eventually only
/// actions from `allowed` are played.
///
/// Reduces to almost-sure reachability of the MECs of the sub-MDP restricted
/// to `allowed`; inside those MECs the witness keeps playing MEC actions.
pub fn almost_sure_cobuchi(mdp: &Mdp, allowed: &BTreeSet<usize>) -> AlmostSure {
    let mask: Vec<bool> = (0..mdp.num_actions()).map(|a| allowed.contains(&a)).collect();
    let inner = mec_decomposition_masked(mdp, &mask);
    let target: BTreeSet<usize> = inner.iter().flat_map(|m| m.states.iter().copied()).collect();
    let reach = almost_sure_reach(mdp, &target);
    let mut choice = reach.strategy.choice.clone();
    for mec in &inner {
        for &s in &mec.states {
            choice[s] = *mec
                .actions
                .iter()
                .find(|&&a| mdp.action(a).source == s)
                .expect("every MEC state has a MEC action");
        }
    }
    AlmostSure { winning: reach.winning, strategy: MemorylessDeterministicStrategy { choice } }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{m_glob, m_uni};

    fn set(mdp: &Mdp, names: &[&str]) -> BTreeSet<usize> {
        names.iter().map(|n| mdp.state_index(n).unwrap()).collect()
    }

    fn actions(mdp: &Mdp, names: &[&str]) -> BTreeSet<usize> {
        names.iter().map(|n| mdp.action_index(n).unwrap()).collect()
    }

    #[test]
    fn reach_s4_in_m_glob() {
        let mdp = m_glob();
        let res = almost_sure_reach(&mdp, &set(&mdp, &["s4"]));
        assert_eq!(res.winning, set(&mdp, &["s3", "s4"]));
        let s3 = mdp.state_index("s3").unwrap();
        assert_eq!(mdp.action(res.strategy.choice[s3]).id, "d");
    }

    #[test]
    fn reach_everything_is_trivial() {
        let mdp = m_glob();
        let all: BTreeSet<usize> = (0..mdp.num_states()).collect();
        assert_eq!(almost_sure_reach(&mdp, &all).winning, all);
    }

    #[test]
    fn reach_s2_only_from_s2() {
        let mdp = m_glob();
        let res = almost_sure_reach(&mdp, &set(&mdp, &["s2"]));
        assert_eq!(res.winning, set(&mdp, &["s2"]));
    }

    #[test]
    fn cobuchi_on_unichain() {
        let mdp = m_uni();
        let both = almost_sure_cobuchi(&mdp, &actions(&mdp, &["b", "c"]));
        assert_eq!(both.winning, set(&mdp, &["s1", "s2"]));
        let s1 = mdp.state_index("s1").unwrap();
        assert_eq!(mdp.action(both.strategy.choice[s1]).id, "b");

        let only_a = almost_sure_cobuchi(&mdp, &actions(&mdp, &["a"]));
        assert!(only_a.winning.is_empty());

        let all = almost_sure_cobuchi(&mdp, &(0..mdp.num_actions()).collect());
        assert_eq!(all.winning.len(), 2);
    }
}
