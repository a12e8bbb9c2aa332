use num_traits::{One, Zero};
use serde::Serialize;

use super::lp::{solve_lp, Direction, LinearProgram, LpStatus, Relation};
use super::rational::{serde_rat, Rat};
use crate::graph::Mec;
use crate::model::Mdp;

/// `[α_C, β_C]`: extreme expected mean payoffs achievable inside one MEC.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PayoffInterval {
    #[serde(with = "serde_rat")]
    pub alpha: Rat,
    #[serde(with = "serde_rat")]
    pub beta: Rat,
}

impl PayoffInterval {
    pub fn contains(&self, z: &Rat) -> bool {
        self.alpha <= *z && *z <= self.beta
    }

    pub fn clamp(&self, z: &Rat) -> Rat {
        if *z < self.alpha {
            self.alpha.clone()
        } else if *z > self.beta {
            self.beta.clone()
        } else {
            z.clone()
        }
    }

    pub fn is_point(&self) -> bool {
        self.alpha == self.beta
    }
}

/// Frequency polytope of a MEC: `x_a ≥ 0` on the MEC actions, flow balance
/// at every MEC state and `Σ x_a = 1`. Variable `i` is `mec.actions[i]`.
pub fn frequency_lp(mdp: &Mdp, mec: &Mec) -> LinearProgram {
    let mut lp = LinearProgram::new();
    let actions: Vec<usize> = mec.actions.iter().copied().collect();
    for &a in &actions {
        lp.add_variable(format!("x_{}", mdp.action(a).id), true);
    }
    for &s in &mec.states {
        let mut row: Vec<(usize, Rat)> = Vec::new();
        for (i, &a) in actions.iter().enumerate() {
            let act = mdp.action(a);
            let mut coef = act.probability_to(s);
            if act.source == s {
                coef -= Rat::one();
            }
            if !coef.is_zero() {
                row.push((i, coef));
            }
        }
        lp.add_constraint(row, Relation::Eq, Rat::zero());
    }
    lp.add_constraint((0..actions.len()).map(|i| (i, Rat::one())).collect(), Relation::Eq, Rat::one());
    lp
}

/// Minimal or maximal mean payoff in the MEC with an optimal basic
/// frequency vector over its actions.
pub fn optimal_frequency(mdp: &Mdp, mec: &Mec, direction: Direction) -> (Rat, Vec<(usize, Rat)>) {
    let mut lp = frequency_lp(mdp, mec);
    let actions: Vec<usize> = mec.actions.iter().copied().collect();
    lp.set_objective(direction, actions.iter().enumerate().map(|(i, &a)| (i, mdp.reward(a).clone())).collect());
    let out = solve_lp(&lp);
    assert_eq!(out.status, LpStatus::Optimal, "frequency polytope of a MEC is nonempty and bounded");
    let freq = actions.into_iter().zip(out.assignment).filter(|(_, x)| !x.is_zero()).collect();
    (out.objective_value.expect("objective set"), freq)
}

pub fn mec_payoff_bounds(mdp: &Mdp, mec: &Mec) -> PayoffInterval {
    PayoffInterval {
        alpha: optimal_frequency(mdp, mec, Direction::Minimize).0,
        beta: optimal_frequency(mdp, mec, Direction::Maximize).0,
    }
}

/// Intervals for a whole decomposition, aligned with `mecs`.
pub fn payoff_intervals(mdp: &Mdp, mecs: &[Mec]) -> Vec<PayoffInterval> {
    mecs.iter().map(|m| mec_payoff_bounds(mdp, m)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{m_glob, m_uni};
    use crate::graph::mec_decomposition;
    use crate::numerics::rational::int;

    #[test]
    fn m_glob_intervals_are_points() {
        let mdp = m_glob();
        let iv = payoff_intervals(&mdp, &mec_decomposition(&mdp));
        let got: Vec<(Rat, Rat)> = iv.into_iter().map(|i| (i.alpha, i.beta)).collect();
        assert_eq!(got, vec![(int(4), int(4)), (int(5), int(5)), (int(0), int(0))]);
    }

    #[test]
    fn m_uni_interval() {
        let mdp = m_uni();
        let mecs = mec_decomposition(&mdp);
        let iv = mec_payoff_bounds(&mdp, &mecs[0]);
        assert_eq!((iv.alpha.clone(), iv.beta.clone()), (int(1), int(2)));
        assert_eq!(iv.clamp(&int(3)), int(2));
        assert!(iv.contains(&crate::numerics::rational::ratio(3, 2)));
    }
}
