//! Global variance: the variance of the mean payoff across runs.
//!
//! An optimal strategy first commits to MECs and then, inside each MEC `C`,
//! realizes a single mean payoff `x_C = clamp(z, α_C, β_C)` for one pivot
//! `z`. With `x_C` fixed, expectation and second moment are linear in the
//! committed masses `Y_C`, so for every pivot on a `τ`-grid the achievable
//! `(E, Q)` region is a polygon whose lower hull is computed exactly. Since
//! `Q − E²` is concave, its minimum over `E ≤ u` sits at a hull vertex or
//! where the hull crosses `E = u`.

use std::collections::BTreeSet;

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::flow::{two_phase_strategy, FlowSystem, FrequencySolution};
use crate::graph::{almost_sure_reach, Mec};
use crate::model::{
    induce_chain, normalize, point_dist, restrict_to_mec, Dist, Mdp, MemorylessStrategy, StochasticUpdateStrategy,
};
use crate::numerics::hull::{lower_hull_of_lp, minimize_on_lower_hull, mix, HullChoice, HullPoint};
use crate::numerics::lp::{solve_lp, LinearProgram, Relation};
use crate::numerics::markov::{evaluate_strategy, stationary_distribution};
use crate::numerics::mean_payoff::{optimal_frequency, payoff_intervals, PayoffInterval};
use crate::numerics::rational::{format_rational, serde_rat, Rat};
use crate::numerics::Direction;
use crate::{Error, Result};

/// How the quadratic variance bound is decided for a fixed pivot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CheckMethod {
    /// Exact lower hull of `(E, Q)`; sound at `(u, v)`.
    #[default]
    Hull,
    /// Sweep the expectation over a second `τ`-grid with linear pins.
    MeanSweep,
}

/// Grid step `τ = eps / (8·max{N, 1})` with `N` the largest absolute reward.
pub fn grid_step(mdp: &Mdp, eps: &Rat) -> Result<Rat> {
    if !eps.is_positive() {
        return Err(Error::InvalidEps);
    }
    let n = mdp.max_abs_reward().max(Rat::one());
    Ok(eps / (Rat::from_integer(8.into()) * n))
}

/// Smallest `k` with `k·τ ≥ x`.
fn ceil_index(x: &Rat, tau: &Rat) -> num_bigint::BigInt {
    (x / tau).ceil().to_integer()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GlobalWitness {
    /// Grid pivot the witness was found for.
    #[serde(with = "serde_rat")]
    pub z_bar: Rat,
    /// Mean payoff realized inside each MEC, aligned with the decomposition.
    #[serde(serialize_with = "serialize_rats")]
    pub x_mec: Vec<Rat>,
    #[serde(skip)]
    pub solution: FrequencySolution,
    #[serde(with = "serde_rat")]
    pub expectation: Rat,
    #[serde(with = "serde_rat")]
    pub variance: Rat,
    #[serde(skip)]
    pub strategy: StochasticUpdateStrategy,
}

fn serialize_rats<S: serde::Serializer>(values: &[Rat], serializer: S) -> std::result::Result<S::Ok, S::Error> {
    serializer.collect_seq(values.iter().map(format_rational))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GlobalAnswer {
    Yes(Box<GlobalWitness>),
    No,
}

impl GlobalAnswer {
    pub fn is_yes(&self) -> bool {
        matches!(self, GlobalAnswer::Yes(_))
    }

    pub fn witness(&self) -> Option<&GlobalWitness> {
        match self {
            GlobalAnswer::Yes(w) => Some(w),
            GlobalAnswer::No => None,
        }
    }
}

/// One pivot with its fixed per-MEC values and the lower hull of `(E, Q)`.
#[derive(Debug, Clone)]
pub struct PivotHull {
    pub z_bar: Rat,
    pub x_mec: Vec<Rat>,
    pub hull: Vec<HullPoint<Vec<Rat>>>,
}

/// Precomputed hulls for every distinct pivot of one `eps`; answers many
/// `(u, v)` queries without further LP solves.
#[derive(Debug, Clone)]
pub struct GlobalTable {
    pub eps: Rat,
    pub pivots: Vec<PivotHull>,
}

impl GlobalTable {
    /// First pivot (smallest `z̄`) whose minimal variance over `E ≤ u` is at most `v`.
    pub fn decide(&self, u: &Rat, v: &Rat) -> Option<(usize, HullChoice)> {
        self.pivots.iter().enumerate().find_map(|(i, p)| {
            minimize_on_lower_hull(&p.hull, u, |e, q| q - e * e).filter(|c| c.value <= *v).map(|c| (i, c))
        })
    }
}

/// Cached per-(MDP, start) data for global-variance queries.
#[derive(Debug, Clone)]
pub struct GlobalAnalyzer<'a> {
    mdp: &'a Mdp,
    start: usize,
    system: FlowSystem,
    intervals: Vec<PayoffInterval>,
}

impl<'a> GlobalAnalyzer<'a> {
    pub fn new(mdp: &'a Mdp, start: usize) -> Self {
        let system = FlowSystem::transient(mdp, start);
        let intervals = payoff_intervals(mdp, &system.mecs);
        GlobalAnalyzer { mdp, start, system, intervals }
    }

    pub fn mecs(&self) -> &[Mec] {
        &self.system.mecs
    }

    pub fn intervals(&self) -> &[PayoffInterval] {
        &self.intervals
    }

    pub fn clamp_vector(&self, z: &Rat) -> Vec<Rat> {
        self.intervals.iter().map(|iv| iv.clamp(z)).collect()
    }

    /// Distinct clamp vectors over the `τ`-grid in `[min r, max r]`, each
    /// tagged with the smallest pivot producing it. Grid stretches where no
    /// nontrivial interval is active are skipped since the vector is constant there.
    pub fn pivots(&self, eps: &Rat) -> Result<Vec<(Rat, Vec<Rat>)>> {
        let tau = grid_step(self.mdp, eps)?;
        let lo = self.mdp.min_reward();
        let hi = self.mdp.max_reward();
        let mut breakpoints: Vec<Rat> =
            self.intervals.iter().flat_map(|iv| [iv.alpha.clone(), iv.beta.clone()]).collect();
        breakpoints.sort();
        breakpoints.dedup();

        let mut zs: Vec<Rat> = vec![lo.clone()];
        let mut k = ceil_index(&lo, &tau);
        loop {
            let z = Rat::from_integer(k.clone()) * &tau;
            if z > hi {
                break;
            }
            zs.push(z.clone());
            let next_bp = breakpoints.iter().find(|b| **b > z);
            let active = |upper: &Rat| {
                self.intervals.iter().any(|iv| !iv.is_point() && iv.alpha < *upper && iv.beta > z)
            };
            k += 1;
            match next_bp {
                Some(b) if !active(b) => {
                    let jump = ceil_index(b, &tau);
                    if jump > k {
                        k = jump;
                    }
                }
                None if !active(&hi) => {
                    let jump = ceil_index(&hi, &tau);
                    if jump > k {
                        k = jump;
                    }
                }
                _ => {}
            }
        }
        zs.push(hi);
        zs.sort();
        zs.dedup();

        let mut out: Vec<(Rat, Vec<Rat>)> = Vec::new();
        for z in zs {
            let x = self.clamp_vector(&z);
            if out.last().is_none_or(|(_, prev)| *prev != x) {
                out.push((z, x));
            }
        }
        Ok(out)
    }

    fn rows(&self, x_mec: &[Rat]) -> (Vec<(usize, Rat)>, Vec<(usize, Rat)>) {
        let mut e_row = Vec::new();
        let mut q_row = Vec::new();
        for (c, mec) in self.system.mecs.iter().enumerate() {
            for &s in &mec.states {
                let v = self.system.y_state[s].expect("MEC state has y_s");
                if !x_mec[c].is_zero() {
                    e_row.push((v, x_mec[c].clone()));
                    q_row.push((v, &x_mec[c] * &x_mec[c]));
                }
            }
        }
        (e_row, q_row)
    }

    /// System `L` with `x_C` fixed to `clamp(z)`: transient flow plus `u ≥ Σ x_C·Y_C`.
    /// The variance bound is left to the caller.
    pub fn system_lz(&self, u: &Rat, z: &Rat) -> LinearProgram {
        let (e_row, _) = self.rows(&self.clamp_vector(z));
        let mut lp = self.system.lp.clone();
        lp.add_constraint(e_row, Relation::Le, u.clone());
        lp
    }

    pub fn hull(&self, x_mec: &[Rat]) -> Vec<HullPoint<Vec<Rat>>> {
        let (e_row, q_row) = self.rows(x_mec);
        lower_hull_of_lp(&self.system.lp, &e_row, &q_row)
    }

    pub fn table(&self, eps: &Rat) -> Result<GlobalTable> {
        let pivots = self
            .pivots(eps)?
            .into_iter()
            .map(|(z_bar, x_mec)| {
                let hull = self.hull(&x_mec);
                PivotHull { z_bar, x_mec, hull }
            })
            .collect();
        Ok(GlobalTable { eps: eps.clone(), pivots })
    }

    /// Builds and verifies the witness for a table decision.
    pub fn witness_from_table(&self, table: &GlobalTable, pivot: usize, choice: &HullChoice) -> Result<GlobalWitness> {
        let p = &table.pivots[pivot];
        let assignment = mix(&p.hull[choice.left].payload, &p.hull[choice.right].payload, &choice.lambda);
        self.witness(p.z_bar.clone(), p.x_mec.clone(), &assignment)
    }

    fn witness(&self, z_bar: Rat, x_mec: Vec<Rat>, assignment: &[Rat]) -> Result<GlobalWitness> {
        let solution = self.system.solution(assignment);
        let strategy = synthesize_global(self.mdp, self.start, &self.system.mecs, &solution, &x_mec)?;
        let analysis = evaluate_strategy(self.mdp, &strategy, self.start)?;
        Ok(GlobalWitness {
            z_bar,
            x_mec,
            solution,
            expectation: analysis.expectation,
            variance: analysis.variance,
            strategy,
        })
    }

    pub fn check(&self, u: &Rat, v: &Rat, eps: &Rat, method: CheckMethod) -> Result<GlobalAnswer> {
        match method {
            CheckMethod::Hull => {
                let table = self.table(eps)?;
                match table.decide(u, v) {
                    Some((i, choice)) => self.verified(self.witness_from_table(&table, i, &choice)?, u, v),
                    None => Ok(GlobalAnswer::No),
                }
            }
            CheckMethod::MeanSweep => self.check_sweep(u, v, eps),
        }
    }

    /// For each pivot and each expectation level `m` on the `τ`-grid, asks
    /// for `m − τ ≤ E ≤ m + τ`, `E ≤ u` and `Q ≤ v + min{E² : |E − m| ≤ τ}`.
    /// Every feasible point satisfies `Q − E² ≤ v`, so answers stay sound.
    fn check_sweep(&self, u: &Rat, v: &Rat, eps: &Rat) -> Result<GlobalAnswer> {
        let tau = grid_step(self.mdp, eps)?;
        for (z_bar, x_mec) in self.pivots(eps)? {
            let (e_row, q_row) = self.rows(&x_mec);
            let lo = x_mec.iter().min().cloned().unwrap_or_else(Rat::zero);
            let hi = x_mec.iter().max().cloned().unwrap_or_else(Rat::zero);
            let mut k = ceil_index(&lo, &tau);
            loop {
                let m = Rat::from_integer(k.clone()) * &tau;
                if m > &hi + &tau || &m - &tau > *u {
                    break;
                }
                let (a, b) = (&m - &tau, &m + &tau);
                let lower = if a.is_positive() {
                    &a * &a
                } else if b.is_negative() {
                    &b * &b
                } else {
                    Rat::zero()
                };
                let mut lp = self.system.lp.clone();
                lp.add_constraint(e_row.clone(), Relation::Ge, a.clone());
                lp.add_constraint(e_row.clone(), Relation::Le, b.min(u.clone()));
                lp.add_constraint(q_row.clone(), Relation::Le, v + lower);
                let out = solve_lp(&lp);
                if out.is_feasible() {
                    let w = self.witness(z_bar.clone(), x_mec.clone(), &out.assignment)?;
                    return self.verified(w, u, v);
                }
                k += 1;
            }
        }
        Ok(GlobalAnswer::No)
    }

    fn verified(&self, w: GlobalWitness, u: &Rat, v: &Rat) -> Result<GlobalAnswer> {
        if w.expectation > *u || w.variance > *v {
            return Err(Error::InfeasibleWitness(format!(
                "global witness realizes ({}, {}) which exceeds ({}, {})",
                format_rational(&w.expectation),
                format_rational(&w.variance),
                format_rational(u),
                format_rational(v)
            )));
        }
        Ok(GlobalAnswer::Yes(Box::new(w)))
    }
}

/// System `L` restricted to a fixed pivot, as a linear program.
pub fn build_system_lz(mdp: &Mdp, start: usize, u: &Rat, z: &Rat) -> LinearProgram {
    GlobalAnalyzer::new(mdp, start).system_lz(u, z)
}

/// Decides the global-variance query up to `eps`: `Yes` whenever some
/// strategy achieves `(u − eps, v − eps)`, `No` whenever none achieves
/// `(u, v)`. Every `Yes` carries a verified 2-memory witness.
pub fn approx_check_global(mdp: &Mdp, start: usize, u: &Rat, v: &Rat, eps: &Rat) -> Result<GlobalAnswer> {
    GlobalAnalyzer::new(mdp, start).check(u, v, eps, CheckMethod::Hull)
}

pub fn approx_check_global_with(
    mdp: &Mdp,
    start: usize,
    u: &Rat,
    v: &Rat,
    eps: &Rat,
    method: CheckMethod,
) -> Result<GlobalAnswer> {
    GlobalAnalyzer::new(mdp, start).check(u, v, eps, method)
}

/// Memoryless strategy on a strongly connected MDP under which almost every
/// run has mean payoff exactly `z`.
///
/// Mixes the frequencies of the uniform strategy (positive everywhere) with
/// an optimal frequency vector towards `α` or `β` and normalizes per state.
/// At `z = α` or `z = β` the optimal vector is realized on one of its
/// recurrent pieces, which the remaining states reach almost surely.
pub fn sigma_zc(mec_mdp: &Mdp, z: &Rat) -> Result<MemorylessStrategy> {
    let whole = Mec {
        states: (0..mec_mdp.num_states()).collect(),
        actions: (0..mec_mdp.num_actions()).collect(),
    };
    let (alpha, f_min) = optimal_frequency(mec_mdp, &whole, Direction::Minimize);
    let (beta, f_max) = optimal_frequency(mec_mdp, &whole, Direction::Maximize);
    if *z < alpha || *z > beta {
        return Err(Error::ZOutsideInterval {
            z: format_rational(z),
            alpha: format_rational(&alpha),
            beta: format_rational(&beta),
        });
    }

    let uniform = MemorylessStrategy::uniform(mec_mdp);
    let chain = induce_chain(mec_mdp, &uniform.clone().into_stochastic_update(), 0);
    let bscc = crate::graph::bsccs(&chain).into_iter().next().expect("finite chain has a BSCC");
    let mut f_uniform = vec![Rat::zero(); mec_mdp.num_actions()];
    for (l, p) in stationary_distribution(&chain, &bscc)? {
        f_uniform[chain.locations[l].action] += p;
    }
    let mp_uniform: Rat = f_uniform.iter().enumerate().map(|(a, f)| f * mec_mdp.reward(a)).sum();

    let dense = |sparse: &[(usize, Rat)]| {
        let mut v = vec![Rat::zero(); mec_mdp.num_actions()];
        for (a, x) in sparse {
            v[*a] = x.clone();
        }
        v
    };
    let (p, extreme) = if *z == mp_uniform {
        (Rat::zero(), f_uniform.clone())
    } else if *z < mp_uniform {
        ((&mp_uniform - z) / (&mp_uniform - &alpha), dense(&f_min))
    } else {
        ((z - &mp_uniform) / (&beta - &mp_uniform), dense(&f_max))
    };

    if p < Rat::one() {
        let freq = mix(&extreme, &f_uniform, &p);
        let choice = (0..mec_mdp.num_states())
            .map(|s| normalize(mec_mdp.enabled(s).iter().map(|&a| (a, freq[a].clone()))).expect("positive"))
            .collect();
        return Ok(MemorylessStrategy { choice });
    }

    // boundary: play one recurrent piece of the optimal vector, reach it from elsewhere
    let pieces = crate::flow::support_components(mec_mdp, &extreme);
    let (piece_states, piece_actions) = pieces.into_iter().next().expect("optimal frequency has support");
    let reach = almost_sure_reach(mec_mdp, &piece_states);
    let choice = (0..mec_mdp.num_states())
        .map(|s| {
            if piece_states.contains(&s) {
                normalize(
                    mec_mdp.enabled(s).iter().filter(|a| piece_actions.contains(a)).map(|&a| (a, extreme[a].clone())),
                )
                .expect("piece state has support")
            } else {
                point_dist(reach.strategy.choice[s])
            }
        })
        .collect();
    Ok(MemorylessStrategy { choice })
}

/// 2-memory strategy from a solution of system `L`: transient play and
/// switching from `y`, then `σ_{x_C}` inside the MEC where the switch happened.
pub fn synthesize_global(
    mdp: &Mdp,
    start: usize,
    mecs: &[Mec],
    solution: &FrequencySolution,
    x_mec: &[Rat],
) -> Result<StochasticUpdateStrategy> {
    check_transient_flow(mdp, start, mecs, solution)?;
    let mass = solution.mec_mass(mecs);
    let mut recurrent: Vec<Dist> = (0..mdp.num_states()).map(|s| point_dist(mdp.enabled(s)[0])).collect();
    for (c, mec) in mecs.iter().enumerate() {
        if mass[c].is_zero() {
            continue;
        }
        let sub = restrict_to_mec(mdp, mec)?;
        let sigma = sigma_zc(&sub.mdp, &x_mec[c])?;
        for (i, dist) in sigma.choice.into_iter().enumerate() {
            recurrent[sub.parent_state(i)] = dist.into_iter().map(|(a, p)| (sub.parent_action(a), p)).collect();
        }
    }
    Ok(two_phase_strategy(mdp, start, &solution.y_state, &solution.y_action, &recurrent))
}

/// Checks the transient flow equations, nonnegativity and unit committed mass.
pub(crate) fn check_transient_flow(mdp: &Mdp, start: usize, mecs: &[Mec], sol: &FrequencySolution) -> Result<()> {
    let bad = |msg: &str| Err(Error::InfeasibleSolution(msg.to_string()));
    if sol.y_state.len() != mdp.num_states() || sol.y_action.len() != mdp.num_actions() {
        return bad("solution has the wrong shape");
    }
    if sol.y_state.iter().chain(&sol.y_action).any(|v| v.is_negative()) {
        return bad("negative flow value");
    }
    let in_mec: BTreeSet<usize> = mecs.iter().flat_map(|m| m.states.iter().copied()).collect();
    if (0..mdp.num_states()).any(|s| !in_mec.contains(&s) && !sol.y_state[s].is_zero()) {
        return bad("commitment outside every MEC");
    }
    let mut balance: Vec<Rat> = (0..mdp.num_states()).map(|s| if s == start { Rat::one() } else { Rat::zero() }).collect();
    for (a, act) in mdp.actions().iter().enumerate() {
        for (t, p) in &act.transitions {
            balance[*t] += p * &sol.y_action[a];
        }
        balance[act.source] -= &sol.y_action[a];
    }
    for s in 0..mdp.num_states() {
        if balance[s] != sol.y_state[s] {
            return bad("transient flow is not balanced");
        }
    }
    Ok(())
}
