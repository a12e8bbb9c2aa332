//! Transient/recurrent flow systems shared by the three variance checks, and
//! the two-phase strategy built from a transient flow.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};
use serde::Serialize;

use crate::graph::{mec_decomposition, mec_membership, tarjan_scc, Mec};
use crate::model::{normalize, point_dist, Dist, Mdp, StochasticUpdateStrategy};
use crate::numerics::lp::{LinearProgram, Relation};
use crate::numerics::rational::{format_rational, Rat};

/// Variables and rows of the flow part of the constraint systems.
///
/// `y_a` is the expected number of times `a` is played before the play
/// commits to a MEC, `y_s` the probability of committing in MEC state `s`,
/// and `x_a` the long-run frequency of MEC action `a`.
#[derive(Debug, Clone)]
pub struct FlowSystem {
    pub lp: LinearProgram,
    pub mecs: Vec<Mec>,
    pub mec_of_state: Vec<Option<usize>>,
    pub start: usize,
    pub y_state: Vec<Option<usize>>,
    pub y_action: Vec<usize>,
    pub x_action: Vec<Option<usize>>,
}

impl FlowSystem {
    /// Transient flow only: for every state
    /// `1[s = s0] + Σ_a y_a·δ(a)(s) = Σ_{a ∈ Act(s)} y_a + y_s`,
    /// and the committed mass `Σ y_s` over MEC states is 1.
    pub fn transient(mdp: &Mdp, start: usize) -> Self {
        let mecs = mec_decomposition(mdp);
        let mec_of_state = mec_membership(mdp, &mecs);
        let mut lp = LinearProgram::new();
        let y_state: Vec<Option<usize>> = (0..mdp.num_states())
            .map(|s| mec_of_state[s].map(|_| lp.add_variable(format!("y_{}", mdp.state_name(s)), true)))
            .collect();
        let y_action: Vec<usize> =
            mdp.actions().iter().map(|a| lp.add_variable(format!("y_{}", a.id), true)).collect();

        let mut inflow: Vec<BTreeMap<usize, Rat>> = vec![BTreeMap::new(); mdp.num_states()];
        for (a, act) in mdp.actions().iter().enumerate() {
            for (t, p) in &act.transitions {
                *inflow[*t].entry(y_action[a]).or_insert_with(Rat::zero) += p;
            }
            *inflow[act.source].entry(y_action[a]).or_insert_with(Rat::zero) -= Rat::one();
        }
        for (s, row) in inflow.into_iter().enumerate() {
            let mut coeffs: Vec<(usize, Rat)> = row.into_iter().filter(|(_, c)| !c.is_zero()).collect();
            if let Some(v) = y_state[s] {
                coeffs.push((v, -Rat::one()));
            }
            let rhs = if s == start { -Rat::one() } else { Rat::zero() };
            lp.add_constraint(coeffs, Relation::Eq, rhs);
        }
        lp.add_constraint(y_state.iter().flatten().map(|&v| (v, Rat::one())).collect(), Relation::Eq, Rat::one());

        let x_action = vec![None; mdp.num_actions()];
        FlowSystem { lp, mecs, mec_of_state, start, y_state, y_action, x_action }
    }

    /// Adds recurrent frequencies `x_a` on MEC actions with flow balance at
    /// every MEC state and, per MEC, `Σ_{s ∈ C} y_s = Σ_{a ∈ C} x_a`.
    pub fn with_recurrent(mdp: &Mdp, start: usize) -> Self {
        let mut sys = Self::transient(mdp, start);
        for mec in &sys.mecs {
            for &a in &mec.actions {
                sys.x_action[a] = Some(sys.lp.add_variable(format!("x_{}", mdp.action(a).id), true));
            }
            for &s in &mec.states {
                let mut row: BTreeMap<usize, Rat> = BTreeMap::new();
                for &a in &mec.actions {
                    let act = mdp.action(a);
                    let mut coef = act.probability_to(s);
                    if act.source == s {
                        coef -= Rat::one();
                    }
                    if !coef.is_zero() {
                        row.insert(sys.x_action[a].unwrap(), coef);
                    }
                }
                sys.lp.add_constraint(row.into_iter().collect(), Relation::Eq, Rat::zero());
            }
            let mut coupling: Vec<(usize, Rat)> =
                mec.states.iter().map(|&s| (sys.y_state[s].unwrap(), Rat::one())).collect();
            coupling.extend(mec.actions.iter().map(|&a| (sys.x_action[a].unwrap(), -Rat::one())));
            sys.lp.add_constraint(coupling, Relation::Eq, Rat::zero());
        }
        sys
    }

    /// `Σ_a c(a)·x_a` as a sparse row.
    pub fn x_row(&self, coef: impl Fn(usize) -> Rat) -> Vec<(usize, Rat)> {
        self.x_action
            .iter()
            .enumerate()
            .filter_map(|(a, v)| v.map(|v| (v, coef(a))))
            .filter(|(_, c)| !c.is_zero())
            .collect()
    }

    /// `Y_C = Σ_{s ∈ C} y_s` as a sparse row.
    pub fn mec_mass_row(&self, mec: usize) -> Vec<(usize, Rat)> {
        self.mecs[mec].states.iter().map(|&s| (self.y_state[s].unwrap(), Rat::one())).collect()
    }

    pub fn solution(&self, assignment: &[Rat]) -> FrequencySolution {
        let get = |v: Option<usize>| v.map(|v| assignment[v].clone()).unwrap_or_else(Rat::zero);
        FrequencySolution {
            y_state: self.y_state.iter().map(|&v| get(v)).collect(),
            y_action: self.y_action.iter().map(|&v| assignment[v].clone()).collect(),
            x_action: self.x_action.iter().map(|&v| get(v)).collect(),
        }
    }
}

/// Values of the flow variables; zero for variables absent from the system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencySolution {
    pub y_state: Vec<Rat>,
    pub y_action: Vec<Rat>,
    pub x_action: Vec<Rat>,
}

impl FrequencySolution {
    /// Committed mass per MEC.
    pub fn mec_mass(&self, mecs: &[Mec]) -> Vec<Rat> {
        mecs.iter().map(|m| m.states.iter().map(|&s| self.y_state[s].clone()).sum()).collect()
    }

    pub fn to_named(&self, mdp: &Mdp) -> NamedSolution {
        let nz = |v: &Rat| !v.is_zero();
        NamedSolution {
            y_state: (0..mdp.num_states())
                .filter(|&s| nz(&self.y_state[s]))
                .map(|s| (mdp.state_name(s).to_string(), format_rational(&self.y_state[s])))
                .collect(),
            y_action: (0..mdp.num_actions())
                .filter(|&a| nz(&self.y_action[a]))
                .map(|a| (mdp.action(a).id.clone(), format_rational(&self.y_action[a])))
                .collect(),
            x_action: (0..mdp.num_actions())
                .filter(|&a| nz(&self.x_action[a]))
                .map(|a| (mdp.action(a).id.clone(), format_rational(&self.x_action[a])))
                .collect(),
        }
    }
}

/// Nonzero entries of a [`FrequencySolution`] keyed by name, for output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NamedSolution {
    pub y_state: BTreeMap<String, String>,
    pub y_action: BTreeMap<String, String>,
    pub x_action: BTreeMap<String, String>,
}

/// Two-memory strategy from a transient flow.
///
/// In `m1` the strategy plays `a` with probability proportional to `y_a`;
/// on arriving in `t` it moves to `m2` with probability
/// `y_t / (y_t + Σ_{a ∈ Act(t)} y_a)`. In `m2` it follows `recurrent` and
/// never updates. Memory that is never used from `start` is pruned.
pub fn two_phase_strategy(
    mdp: &Mdp,
    start: usize,
    y_state: &[Rat],
    y_action: &[Rat],
    recurrent: &[Dist],
) -> StochasticUpdateStrategy {
    let n = mdp.num_states();
    let switch: Vec<Option<Dist>> = (0..n)
        .map(|t| {
            let stay: Rat = mdp.enabled(t).iter().map(|&a| y_action[a].clone()).sum();
            normalize([(0, stay), (1, y_state[t].clone())])
        })
        .collect();
    let next_move: Vec<Vec<Dist>> = (0..n)
        .map(|s| {
            let m1 = normalize(mdp.enabled(s).iter().map(|&a| (a, y_action[a].clone())))
                .unwrap_or_else(|| point_dist(mdp.enabled(s)[0]));
            vec![m1, recurrent[s].clone()]
        })
        .collect();
    let mut memory_update = BTreeMap::new();
    for (a, act) in mdp.actions().iter().enumerate() {
        for t in act.successors() {
            if let Some(d) = &switch[t] {
                if d.iter().any(|(m, _)| *m == 1) {
                    memory_update.insert((a, t, 0), d.clone());
                }
            }
        }
    }
    let strategy = StochasticUpdateStrategy {
        memory: vec!["m1".into(), "m2".into()],
        initial_memory: switch[start].clone().unwrap_or_else(|| point_dist(0)),
        next_move,
        memory_update,
    };
    strategy.prune_unreachable_memory(mdp, start)
}

/// Closed strongly connected pieces of the support of a recurrent flow
/// `x`, each as (states, actions).
pub fn support_components(mdp: &Mdp, x: &[Rat]) -> Vec<(BTreeSet<usize>, BTreeSet<usize>)> {
    let n = mdp.num_states();
    let adjacency: Vec<Vec<usize>> = (0..n)
        .map(|s| {
            mdp.enabled(s)
                .iter()
                .filter(|&&a| !x[a].is_zero())
                .flat_map(|&a| mdp.action(a).successors())
                .collect()
        })
        .collect();
    let in_support: Vec<bool> = (0..n).map(|s| mdp.enabled(s).iter().any(|&a| !x[a].is_zero())).collect();
    let mut comps: Vec<(BTreeSet<usize>, BTreeSet<usize>)> = tarjan_scc(&adjacency)
        .into_iter()
        .filter(|c| in_support[c[0]])
        .map(|c| {
            let actions = c.iter().flat_map(|&s| mdp.enabled(s).iter().copied().filter(|&a| !x[a].is_zero())).collect();
            (c.into_iter().collect(), actions)
        })
        .collect();
    comps.sort();
    comps
}
