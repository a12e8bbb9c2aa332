use std::collections::BTreeSet;

use num_traits::{One, Zero};

use super::lp::{solve_lp, Direction, LinearProgram, LpStatus, Relation};
use super::rational::Rat;
use super::NumericsError;
use crate::graph::{almost_sure_reach, almost_sure_reach_masked};
use crate::model::{Mdp, MemorylessDeterministicStrategy};

/// Minimal expected total reward until reaching a target, per state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CumulativeReward {
    /// `None` outside the almost-sure winning region of the target.
    pub values: Vec<Option<Rat>>,
    /// Attains the values and reaches the target with probability 1 from
    /// every state that has a value.
    pub strategy: MemorylessDeterministicStrategy,
}

impl CumulativeReward {
    pub fn value(&self, mdp: &Mdp, s: usize) -> Result<&Rat, NumericsError> {
        self.values[s]
            .as_ref()
            .ok_or_else(|| NumericsError::TargetNotAlmostSureReachable(mdp.state_name(s).to_string()))
    }
}

/// Stochastic shortest path: minimizes the expected reward collected before
/// the target among strategies that reach it almost surely. Rewards outside
/// the target must be nonpositive; the target is treated as absorbing.
///
/// Solved as `max Σ v` subject to `v_s ≤ r(a) + Σ δ(a)(t)·v_t` over actions
/// that keep the play inside the almost-sure region. The witness
/// almost-surely reaches the target using only tight actions.
pub fn min_cumulative_reward_as_reach(mdp: &Mdp, target: &BTreeSet<usize>) -> CumulativeReward {
    let n = mdp.num_states();
    let region = almost_sure_reach(mdp, target).winning;
    let inner: Vec<usize> = region.iter().copied().filter(|s| !target.contains(s)).collect();
    let mut var = vec![usize::MAX; n];
    let mut lp = LinearProgram::new();
    for &s in &inner {
        var[s] = lp.add_variable(format!("v_{}", mdp.state_name(s)), false);
    }
    let usable = |a: usize| mdp.action(a).successors().all(|t| region.contains(&t));
    let mut rows: Vec<(usize, Vec<(usize, Rat)>)> = Vec::new();
    for &s in &inner {
        for &a in mdp.enabled(s) {
            if !usable(a) {
                continue;
            }
            let mut coeffs = vec![(var[s], Rat::one())];
            for (t, p) in &mdp.action(a).transitions {
                if var[*t] != usize::MAX {
                    coeffs.push((var[*t], -p.clone()));
                }
            }
            lp.add_constraint(coeffs.clone(), Relation::Le, mdp.reward(a).clone());
            rows.push((a, coeffs));
        }
    }
    lp.set_objective(Direction::Maximize, inner.iter().map(|&s| (var[s], Rat::one())).collect());
    let out = solve_lp(&lp);
    let values_lp = if inner.is_empty() {
        Vec::new()
    } else {
        assert_eq!(out.status, LpStatus::Optimal, "shortest-path LP is bounded on the almost-sure region");
        out.assignment
    };

    let mut allowed = vec![false; mdp.num_actions()];
    for (a, coeffs) in &rows {
        if lp.evaluate(coeffs, &values_lp) == *mdp.reward(*a) {
            allowed[*a] = true;
        }
    }
    let tight = almost_sure_reach_masked(mdp, target, &allowed);
    debug_assert!(inner.iter().all(|s| tight.winning.contains(s)));

    let values = (0..n)
        .map(|s| {
            if target.contains(&s) {
                Some(Rat::zero())
            } else if var[s] != usize::MAX {
                Some(values_lp[var[s]].clone())
            } else {
                None
            }
        })
        .collect();
    CumulativeReward { values, strategy: tight.strategy }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rational::int;

    #[test]
    fn path_of_minus_three() {
        let mdp = Mdp::from_json_str(
            r#"{"states":["s","t"],"initial":"s","actions":[
                {"id":"go","source":"s","reward":"-3","transitions":{"t":"1"}},
                {"id":"idle","source":"s","reward":"0","transitions":{"s":"1"}},
                {"id":"stay","source":"t","reward":"0","transitions":{"t":"1"}}]}"#,
        )
        .unwrap();
        let t: BTreeSet<usize> = [1].into_iter().collect();
        let res = min_cumulative_reward_as_reach(&mdp, &t);
        assert_eq!(res.value(&mdp, 0).unwrap(), &int(-3));
        assert_eq!(res.value(&mdp, 1).unwrap(), &int(0));
        assert_eq!(mdp.action(res.strategy.choice[0]).id, "go");
    }

    #[test]
    fn zero_cycle_does_not_trap_witness() {
        // s can loop for free, or go to u which pays -1 into the target;
        // the loop is tight but the witness must still leave it
        let mdp = Mdp::from_json_str(
            r#"{"states":["s","t","u"],"initial":"s","actions":[
                {"id":"loop","source":"s","reward":"0","transitions":{"s":"1"}},
                {"id":"step","source":"s","reward":"0","transitions":{"u":"1"}},
                {"id":"pay","source":"u","reward":"-1","transitions":{"t":"1"}},
                {"id":"stay","source":"t","reward":"0","transitions":{"t":"1"}}]}"#,
        )
        .unwrap();
        let t: BTreeSet<usize> = [mdp.state_index("t").unwrap()].into_iter().collect();
        let res = min_cumulative_reward_as_reach(&mdp, &t);
        let s = mdp.state_index("s").unwrap();
        assert_eq!(res.value(&mdp, s).unwrap(), &int(-1));
        assert_eq!(mdp.action(res.strategy.choice[s]).id, "step");
    }

    #[test]
    fn unreachable_target_is_an_error() {
        let mdp = Mdp::from_json_str(
            r#"{"states":["s","t"],"initial":"s","actions":[
                {"id":"idle","source":"s","reward":"0","transitions":{"s":"1"}},
                {"id":"stay","source":"t","reward":"0","transitions":{"t":"1"}}]}"#,
        )
        .unwrap();
        let res = min_cumulative_reward_as_reach(&mdp, &[1].into_iter().collect());
        assert!(matches!(res.value(&mdp, 0), Err(NumericsError::TargetNotAlmostSureReachable(_))));
    }
}
