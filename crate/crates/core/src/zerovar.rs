//! Least expectation achievable with zero variance, for each of the three
//! variance notions.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};
use serde::Serialize;

use crate::global::sigma_zc;
use crate::graph::{almost_sure_cobuchi, almost_sure_reach, mec_decomposition, Mec};
use crate::model::{
    point_dist, restrict_to_mec, validate_mdp, Dist, Mdp, RawAction, RawMdp, StochasticUpdateStrategy,
};
use crate::numerics::mean_payoff::payoff_intervals;
use crate::numerics::rational::{format_rational, serde_rat, NumberText, Rat};
use crate::numerics::ssp::min_cumulative_reward_as_reach;
use crate::{Result, VarianceKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ZeroVarAnswer {
    pub kind: VarianceKind,
    /// Least expectation with zero variance; `None` when no strategy has zero variance.
    #[serde(with = "serde_rat::option")]
    pub value: Option<Rat>,
    #[serde(skip)]
    pub witness: Option<StochasticUpdateStrategy>,
}

impl ZeroVarAnswer {
    fn no(kind: VarianceKind) -> Self {
        ZeroVarAnswer { kind, value: None, witness: None }
    }

    pub fn describe(&self) -> String {
        self.value.as_ref().map(format_rational).unwrap_or_else(|| "NO".into())
    }
}

/// Per state, the least reward value `b` such that the play can almost
/// surely end up using only reward-`b` actions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BetaFunction {
    /// `None` stands for `+∞`.
    pub values: Vec<Option<Rat>>,
    /// Memoryless witness for each reward value that occurs in `values`.
    pub witnesses: BTreeMap<Rat, Vec<usize>>,
}

pub fn beta_function(mdp: &Mdp) -> BetaFunction {
    let mut values: Vec<Option<Rat>> = vec![None; mdp.num_states()];
    let mut witnesses = BTreeMap::new();
    for b in mdp.distinct_rewards() {
        let allowed: BTreeSet<usize> = (0..mdp.num_actions()).filter(|&a| *mdp.reward(a) == b).collect();
        let res = almost_sure_cobuchi(mdp, &allowed);
        let mut used = false;
        for &s in &res.winning {
            if values[s].is_none() {
                values[s] = Some(b.clone());
                used = true;
            }
        }
        if used {
            witnesses.insert(b, res.strategy.choice);
        }
    }
    BetaFunction { values, witnesses }
}

fn memoryless(choice: &[usize]) -> StochasticUpdateStrategy {
    StochasticUpdateStrategy {
        memory: vec!["m".into()],
        initial_memory: point_dist(0),
        next_move: choice.iter().map(|&a| vec![point_dist(a)]).collect(),
        memory_update: BTreeMap::new(),
    }
}

/// Least `b` among the rewards such that the play almost surely eventually
/// uses only reward-`b` actions; then every step reward converges to `b`.
pub fn zero_hybrid(mdp: &Mdp, start: usize) -> ZeroVarAnswer {
    for b in mdp.distinct_rewards() {
        let allowed: BTreeSet<usize> = (0..mdp.num_actions()).filter(|&a| *mdp.reward(a) == b).collect();
        let res = almost_sure_cobuchi(mdp, &allowed);
        if res.wins(start) {
            return ZeroVarAnswer {
                kind: VarianceKind::Hybrid,
                value: Some(b),
                witness: Some(memoryless(&res.strategy.choice)),
            };
        }
    }
    ZeroVarAnswer::no(VarianceKind::Hybrid)
}

/// Auxiliary MDP for the local case: every state with finite `β` gets an
/// extra action into an absorbing copy, paying `β(s) − offset`; all other
/// rewards are zero.
struct SwitchMdp {
    mdp: Mdp,
    /// Base state index to its index in `mdp`.
    state: Vec<usize>,
    /// Base action index to its index in `mdp`.
    action: Vec<usize>,
    switch: Vec<Option<usize>>,
    done: BTreeSet<usize>,
}

fn switch_mdp(mdp: &Mdp, beta: &BetaFunction, offset: &Rat) -> Result<SwitchMdp> {
    let zero = || NumberText::from(&Rat::zero());
    let one = || NumberText::from(&Rat::one());
    let done_name = |s: usize| format!("{}#done", mdp.state_name(s));
    let mut states: Vec<String> = mdp.state_names().to_vec();
    let mut actions: Vec<RawAction> = mdp
        .actions()
        .iter()
        .map(|a| RawAction {
            id: a.id.clone(),
            source: mdp.state_name(a.source).to_string(),
            reward: zero(),
            transitions: a.transitions.iter().map(|(t, p)| (mdp.state_name(*t).to_string(), NumberText::from(p))).collect(),
        })
        .collect();
    for (s, b) in beta.values.iter().enumerate() {
        if let Some(b) = b {
            states.push(done_name(s));
            actions.push(RawAction {
                id: format!("switch@{}", mdp.state_name(s)),
                source: mdp.state_name(s).to_string(),
                reward: NumberText::from(&(b - offset)),
                transitions: [(done_name(s), one())].into_iter().collect(),
            });
            actions.push(RawAction {
                id: format!("stay@{}", done_name(s)),
                source: done_name(s),
                reward: zero(),
                transitions: [(done_name(s), one())].into_iter().collect(),
            });
        }
    }
    let g = validate_mdp(&RawMdp { states, initial: mdp.state_name(mdp.initial()).to_string(), actions })?;
    let state = (0..mdp.num_states()).map(|s| g.state_index(mdp.state_name(s)).unwrap()).collect();
    let action = mdp.actions().iter().map(|a| g.action_index(&a.id).unwrap()).collect();
    let switch = (0..mdp.num_states())
        .map(|s| g.action_index(&format!("switch@{}", mdp.state_name(s))))
        .collect();
    let done = (0..mdp.num_states()).filter_map(|s| g.state_index(&done_name(s))).collect();
    Ok(SwitchMdp { mdp: g, state, action, switch, done })
}

/// Least expectation with zero local variance.
///
/// The play moves to a state `s` with finite `β(s)` and then keeps reward
/// `β(s)` forever, so the task is to minimize the expected `β` at the
/// switching point among strategies that switch almost surely.
///
/// The witness has one memory element for the transient phase and one per
/// reward value it may switch to.
pub fn zero_local(mdp: &Mdp, start: usize) -> Result<ZeroVarAnswer> {
    let beta = beta_function(mdp);
    let Some(max_beta) = beta.values.iter().flatten().max().cloned() else {
        return Ok(ZeroVarAnswer::no(VarianceKind::Local));
    };
    let offset = max_beta + Rat::one();
    let g = switch_mdp(mdp, &beta, &offset)?;
    let ssp = min_cumulative_reward_as_reach(&g.mdp, &g.done);
    let Some(value) = ssp.values[g.state[start]].clone() else {
        return Ok(ZeroVarAnswer::no(VarianceKind::Local));
    };

    let switches_at = |s: usize| g.switch[s].is_some_and(|a| ssp.strategy.choice[g.state[s]] == a);
    let levels: Vec<Rat> = beta.witnesses.keys().cloned().collect();
    let level_memory = |b: &Rat| 1 + levels.iter().position(|l| l == b).expect("known level");
    let enter = |s: usize| -> usize {
        if switches_at(s) {
            level_memory(beta.values[s].as_ref().expect("switch needs finite beta"))
        } else {
            0
        }
    };

    let mut memory = vec!["m1".to_string()];
    memory.extend(levels.iter().map(|b| format!("keep {}", format_rational(b))));
    let next_move: Vec<Vec<Dist>> = (0..mdp.num_states())
        .map(|s| {
            let g_choice = ssp.strategy.choice[g.state[s]];
            let m1 = g.action.iter().position(|&a| a == g_choice).unwrap_or(mdp.enabled(s)[0]);
            let mut row = vec![point_dist(m1)];
            row.extend(levels.iter().map(|b| point_dist(beta.witnesses[b][s])));
            row
        })
        .collect();
    let mut memory_update = BTreeMap::new();
    for (a, act) in mdp.actions().iter().enumerate() {
        for t in act.successors() {
            let m = enter(t);
            if m != 0 {
                memory_update.insert((a, t, 0), point_dist(m));
            }
        }
    }
    let strategy = StochasticUpdateStrategy { memory, initial_memory: point_dist(enter(start)), next_move, memory_update };
    Ok(ZeroVarAnswer {
        kind: VarianceKind::Local,
        value: Some(value + offset),
        witness: Some(strategy.prune_unreachable_memory(mdp, start)),
    })
}

/// Least `ℓ` such that the play can almost surely reach MECs whose payoff
/// interval contains `ℓ`; inside them a memoryless strategy realizes mean
/// payoff exactly `ℓ`.
pub fn zero_global(mdp: &Mdp, start: usize) -> Result<ZeroVarAnswer> {
    let mecs = mec_decomposition(mdp);
    let intervals = payoff_intervals(mdp, &mecs);
    let mut candidates: Vec<Rat> = intervals.iter().map(|iv| iv.alpha.clone()).collect();
    candidates.sort();
    candidates.dedup();
    for level in candidates {
        let chosen: Vec<&Mec> =
            mecs.iter().zip(&intervals).filter(|(_, iv)| iv.contains(&level)).map(|(m, _)| m).collect();
        let target: BTreeSet<usize> = chosen.iter().flat_map(|m| m.states.iter().copied()).collect();
        let reach = almost_sure_reach(mdp, &target);
        if !reach.wins(start) {
            continue;
        }
        let mut recurrent: Vec<Dist> = (0..mdp.num_states()).map(|s| point_dist(mdp.enabled(s)[0])).collect();
        for mec in chosen {
            let sub = restrict_to_mec(mdp, mec)?;
            let sigma = sigma_zc(&sub.mdp, &level)?;
            for (i, dist) in sigma.choice.into_iter().enumerate() {
                recurrent[sub.parent_state(i)] = dist.into_iter().map(|(a, p)| (sub.parent_action(a), p)).collect();
            }
        }
        let next_move = (0..mdp.num_states())
            .map(|s| vec![point_dist(reach.strategy.choice[s]), recurrent[s].clone()])
            .collect();
        let mut memory_update = BTreeMap::new();
        for (a, act) in mdp.actions().iter().enumerate() {
            for t in act.successors().filter(|t| target.contains(t)) {
                memory_update.insert((a, t, 0), point_dist(1));
            }
        }
        let initial = if target.contains(&start) { 1 } else { 0 };
        let strategy = StochasticUpdateStrategy {
            memory: vec!["m1".into(), "m2".into()],
            initial_memory: point_dist(initial),
            next_move,
            memory_update,
        };
        return Ok(ZeroVarAnswer {
            kind: VarianceKind::Global,
            value: Some(level),
            witness: Some(strategy.prune_unreachable_memory(mdp, start)),
        });
    }
    Ok(ZeroVarAnswer::no(VarianceKind::Global))
}

pub fn zero_var(mdp: &Mdp, start: usize, kind: VarianceKind) -> Result<ZeroVarAnswer> {
    match kind {
        VarianceKind::Global => zero_global(mdp, start),
        VarianceKind::Local => zero_local(mdp, start),
        VarianceKind::Hybrid => Ok(zero_hybrid(mdp, start)),
    }
}

/// Answers for every state, in state order.
pub fn zero_var_all_states(mdp: &Mdp, kind: VarianceKind) -> Result<Vec<ZeroVarAnswer>> {
    (0..mdp.num_states()).map(|s| zero_var(mdp, s, kind)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{m_glob, m_uni};
    use crate::numerics::markov::evaluate_strategy;
    use crate::numerics::rational::int;

    fn at(mdp: &Mdp, name: &str) -> usize {
        mdp.state_index(name).unwrap()
    }

    #[test]
    fn hybrid_values() {
        let uni = m_uni();
        let glob = m_glob();
        assert_eq!(zero_hybrid(&uni, at(&uni, "s1")).value, Some(int(2)));
        assert_eq!(zero_hybrid(&glob, at(&glob, "s2")).value, Some(int(4)));
        assert_eq!(zero_hybrid(&glob, at(&glob, "s1")).value, None);
        assert_eq!(zero_hybrid(&glob, at(&glob, "s3")).value, Some(int(0)));
    }

    #[test]
    fn beta_on_m_glob() {
        let glob = m_glob();
        let beta = beta_function(&glob);
        assert_eq!(beta.values, vec![None, Some(int(4)), Some(int(0)), Some(int(0))]);
    }

    #[test]
    fn local_values() {
        let uni = m_uni();
        let glob = m_glob();
        assert_eq!(zero_local(&uni, 0).unwrap().value, Some(int(2)));
        let ans = zero_local(&glob, at(&glob, "s1")).unwrap();
        assert_eq!(ans.value, Some(int(2)));
        let w = ans.witness.unwrap();
        let a = evaluate_strategy(&glob, &w, 0).unwrap();
        assert_eq!((a.expectation, a.local_variance), (int(2), int(0)));
    }

    #[test]
    fn global_values() {
        let uni = m_uni();
        let glob = m_glob();
        assert_eq!(zero_global(&glob, at(&glob, "s3")).unwrap().value, Some(int(0)));
        assert_eq!(zero_global(&glob, at(&glob, "s1")).unwrap().value, None);
        let ans = zero_global(&uni, 0).unwrap();
        assert_eq!(ans.value, Some(int(1)));
        let a = evaluate_strategy(&uni, ans.witness.as_ref().unwrap(), 0).unwrap();
        assert_eq!((a.expectation, a.variance), (int(1), int(0)));
    }

    #[test]
    fn witnesses_realize_values() {
        for mdp in [m_glob(), m_uni()] {
            for s in 0..mdp.num_states() {
                let h = zero_hybrid(&mdp, s);
                if let (Some(v), Some(w)) = (&h.value, &h.witness) {
                    let a = evaluate_strategy(&mdp, w, s).unwrap();
                    assert_eq!((&a.expectation, a.hybrid_variance), (v, int(0)));
                }
                let l = zero_local(&mdp, s).unwrap();
                if let (Some(v), Some(w)) = (&l.value, &l.witness) {
                    let a = evaluate_strategy(&mdp, w, s).unwrap();
                    assert_eq!((&a.expectation, a.local_variance), (v, int(0)));
                }
                let g = zero_global(&mdp, s).unwrap();
                if let (Some(v), Some(w)) = (&g.value, &g.witness) {
                    let a = evaluate_strategy(&mdp, w, s).unwrap();
                    assert_eq!((&a.expectation, a.variance), (v, int(0)));
                }
            }
        }
    }
}
