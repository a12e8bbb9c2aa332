//! Local variance: squared deviation of step rewards from the run's own
//! mean payoff.
//!
//! Some optimal strategy plays transiently and eventually freezes into one
//! of two memoryless deterministic strategies `π`, `π'`. For a fixed pair
//! the achievable `(E[mp], E[lv])` points are the switching distributions
//! of a flow on the product `G[π, π']`, weighted by the per-state
//! statistics of `π` and `π'`. Pairs are enumerated in canonical order.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::flow::{FlowSystem, FrequencySolution};
use crate::model::{
    enumerate_md_strategies, induce_chain_from_states, normalize, point_dist, validate_mdp, Dist, Location, Mdp,
    MemorylessDeterministicStrategy, RawAction, RawMdp, StochasticUpdateStrategy,
};
use crate::numerics::hull::{lower_hull_of_lp, minimize_on_lower_hull, mix, HullChoice, HullPoint};
use crate::numerics::lp::{solve_lp, LinearProgram, Relation};
use crate::numerics::markov::{chain_long_run_stats, evaluate_strategy};
use crate::numerics::rational::{format_rational, serde_rat, NumberText, Rat};
use crate::{Error, Result};

/// Default cap on the number of strategy pairs examined.
pub const DEFAULT_PAIR_BUDGET: usize = 10_000;

/// Per-state `(E[mp], E[lv])` of the chain induced by `pi`.
pub fn md_local_stats(mdp: &Mdp, pi: &MemorylessDeterministicStrategy) -> Result<Vec<(Rat, Rat)>> {
    let strategy = pi.to_memoryless().into_stochastic_update();
    let all: Vec<usize> = (0..mdp.num_states()).collect();
    let chain = induce_chain_from_states(mdp, &strategy, &all);
    (0..mdp.num_states())
        .map(|s| {
            let loc = chain
                .location_index(&Location { state: s, memory: 0, action: pi.choice[s] })
                .expect("every state seeds the chain");
            Ok(chain_long_run_stats(&chain, loc)?)
        })
        .collect()
}

/// The product `G[π, π']` with a two-dimensional reward per state.
#[derive(Debug, Clone)]
pub struct ProductMdp {
    pub mdp: Mdp,
    pub pi: MemorylessDeterministicStrategy,
    pub pi_prime: MemorylessDeterministicStrategy,
    /// `(mean payoff, local variance)` per product state.
    pub rewards: Vec<(Rat, Rat)>,
    pub input: usize,
    pub m1: Vec<usize>,
    pub m2: Vec<usize>,
    pub m2_prime: Vec<usize>,
    /// Copy of each base action inside the `m1` layer.
    pub base_action: Vec<usize>,
    /// `[π]@s` and `[π']@s` per base state.
    pub to_pi: Vec<usize>,
    pub to_pi_prime: Vec<usize>,
    pub input_default: usize,
    pub input_pi: usize,
    pub input_pi_prime: usize,
}

impl ProductMdp {
    pub fn base_states(&self) -> usize {
        self.m1.len()
    }

    fn is_frozen(&self, p: usize) -> bool {
        let n = self.base_states();
        (0..n).any(|s| self.m2[s] == p || self.m2_prime[s] == p)
    }
}

fn state_name(base: &Mdp, s: usize, layer: &str) -> String {
    format!("({},{})", base.state_name(s), layer)
}

pub fn build_product(
    mdp: &Mdp,
    start: usize,
    pi: &MemorylessDeterministicStrategy,
    pi_prime: &MemorylessDeterministicStrategy,
) -> Result<ProductMdp> {
    let n = mdp.num_states();
    let one = || NumberText::from(&Rat::one());
    let zero = || NumberText::from(&Rat::zero());
    let to = |name: String| -> BTreeMap<String, NumberText> { [(name, one())].into_iter().collect() };

    let mut states = vec!["(in)".to_string()];
    for layer in ["m1", "m2", "m2'"] {
        states.extend((0..n).map(|s| state_name(mdp, s, layer)));
    }
    let mut actions = vec![
        RawAction { id: "default@in".into(), source: "(in)".into(), reward: zero(), transitions: to(state_name(mdp, start, "m1")) },
        RawAction { id: "[pi]@in".into(), source: "(in)".into(), reward: zero(), transitions: to(state_name(mdp, start, "m2")) },
        RawAction { id: "[pi']@in".into(), source: "(in)".into(), reward: zero(), transitions: to(state_name(mdp, start, "m2'")) },
    ];
    for act in mdp.actions() {
        actions.push(RawAction {
            id: act.id.clone(),
            source: state_name(mdp, act.source, "m1"),
            reward: zero(),
            transitions: act.transitions.iter().map(|(t, p)| (state_name(mdp, *t, "m1"), NumberText::from(p))).collect(),
        });
    }
    for s in 0..n {
        let name = mdp.state_name(s);
        let m1 = state_name(mdp, s, "m1");
        actions.push(RawAction { id: format!("[pi]@{name}"), source: m1.clone(), reward: zero(), transitions: to(state_name(mdp, s, "m2")) });
        actions.push(RawAction { id: format!("[pi']@{name}"), source: m1, reward: zero(), transitions: to(state_name(mdp, s, "m2'")) });
        for layer in ["m2", "m2'"] {
            let here = state_name(mdp, s, layer);
            actions.push(RawAction { id: format!("default@{here}"), source: here.clone(), reward: zero(), transitions: to(here) });
        }
    }
    let product = validate_mdp(&RawMdp { states, initial: "(in)".into(), actions })?;

    let st = |name: String| product.state_index(&name).expect("product state");
    let ac = |id: String| product.action_index(&id).expect("product action");
    let stats_pi = md_local_stats(mdp, pi)?;
    let stats_pi_prime = md_local_stats(mdp, pi_prime)?;
    let spread = mdp.max_reward() - mdp.min_reward();
    let penalty = (mdp.max_reward() + Rat::one(), &spread * &spread + Rat::one());
    let mut rewards = vec![penalty; product.num_states()];
    let m2: Vec<usize> = (0..n).map(|s| st(state_name(mdp, s, "m2"))).collect();
    let m2_prime: Vec<usize> = (0..n).map(|s| st(state_name(mdp, s, "m2'"))).collect();
    for s in 0..n {
        rewards[m2[s]] = stats_pi[s].clone();
        rewards[m2_prime[s]] = stats_pi_prime[s].clone();
    }
    Ok(ProductMdp {
        pi: pi.clone(),
        pi_prime: pi_prime.clone(),
        rewards,
        input: st("(in)".into()),
        m1: (0..n).map(|s| st(state_name(mdp, s, "m1"))).collect(),
        m2,
        m2_prime,
        base_action: mdp.actions().iter().map(|a| ac(a.id.clone())).collect(),
        to_pi: (0..n).map(|s| ac(format!("[pi]@{}", mdp.state_name(s)))).collect(),
        to_pi_prime: (0..n).map(|s| ac(format!("[pi']@{}", mdp.state_name(s)))).collect(),
        input_default: ac("default@in".into()),
        input_pi: ac("[pi]@in".into()),
        input_pi_prime: ac("[pi']@in".into()),
        mdp: product,
    })
}

/// Flow system on a product with the two reward rows. Recurrent frequency
/// is only allowed on the frozen copies.
#[derive(Debug, Clone)]
pub struct ProductSystem {
    pub flow: FlowSystem,
    pub e_row: Vec<(usize, Rat)>,
    pub l_row: Vec<(usize, Rat)>,
}

pub fn build_product_system(product: &ProductMdp) -> ProductSystem {
    let pm = &product.mdp;
    let mut flow = FlowSystem::with_recurrent(pm, product.input);
    for (a, v) in flow.x_action.iter().enumerate() {
        if let Some(v) = v {
            if !product.is_frozen(pm.action(a).source) {
                flow.lp.add_constraint(vec![(*v, Rat::one())], Relation::Eq, Rat::zero());
            }
        }
    }
    let e_row = flow.x_row(|a| product.rewards[pm.action(a).source].0.clone());
    let l_row = flow.x_row(|a| product.rewards[pm.action(a).source].1.clone());
    ProductSystem { flow, e_row, l_row }
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalWitness {
    /// Position of `(π, π')` in the canonical pair order.
    pub pair_index: usize,
    #[serde(skip)]
    pub pi: MemorylessDeterministicStrategy,
    #[serde(skip)]
    pub pi_prime: MemorylessDeterministicStrategy,
    /// Flow values on the product.
    #[serde(skip)]
    pub rho: FrequencySolution,
    #[serde(with = "serde_rat")]
    pub expectation: Rat,
    #[serde(with = "serde_rat")]
    pub local_variance: Rat,
    #[serde(skip)]
    pub strategy: StochasticUpdateStrategy,
}

#[derive(Debug, Clone)]
pub enum LocalAnswer {
    Yes(Box<LocalWitness>),
    No,
    /// No feasible pair among the first `checked` ones; more remain.
    BudgetExceeded { checked: usize, total: u128 },
}

impl LocalAnswer {
    pub fn is_yes(&self) -> bool {
        matches!(self, LocalAnswer::Yes(_))
    }

    pub fn is_no(&self) -> bool {
        matches!(self, LocalAnswer::No)
    }

    pub fn witness(&self) -> Option<&LocalWitness> {
        match self {
            LocalAnswer::Yes(w) => Some(w),
            _ => None,
        }
    }
}

/// Canonical pair order: `(π_i, π_j)` with `i ≤ j` in lexicographic order.
pub fn md_pairs(mdp: &Mdp, limit: usize) -> Vec<(MemorylessDeterministicStrategy, MemorylessDeterministicStrategy)> {
    let count = mdp.count_md_strategies();
    let take = usize::try_from(count).unwrap_or(usize::MAX).min(limit.saturating_add(1));
    let all: Vec<MemorylessDeterministicStrategy> = enumerate_md_strategies(mdp).take(take).collect();
    let mut out = Vec::new();
    'outer: for i in 0..all.len() {
        for j in i..all.len() {
            if out.len() == limit {
                break 'outer;
            }
            out.push((all[i].clone(), all[j].clone()));
        }
    }
    out
}

fn total_pairs(mdp: &Mdp) -> u128 {
    let k = mdp.count_md_strategies();
    k.saturating_mul(k.saturating_add(1)) / 2
}

/// 3-memory strategy from a product flow.
///
/// In `m1` it plays base actions `∝ ρ`; on arriving in `t` it moves to `m2`
/// or `m2'` with the share of `ρ` leaving `(t, m1)` through `[π]` or `[π']`.
/// In `m2` it plays `π`, in `m2'` it plays `π'`, and never updates again.
pub fn synthesize_local(mdp: &Mdp, start: usize, product: &ProductMdp, rho: &FrequencySolution) -> Result<StochasticUpdateStrategy> {
    let n = mdp.num_states();
    let y = &rho.y_action;
    if y.len() != product.mdp.num_actions() || y.iter().any(|v| *v < Rat::zero()) {
        return Err(Error::InfeasibleSolution("product flow malformed or negative".into()));
    }
    let switch = |t: usize| -> Option<Dist> {
        let stay: Rat = mdp.enabled(t).iter().map(|&a| y[product.base_action[a]].clone()).sum();
        normalize([(0, stay), (1, y[product.to_pi[t]].clone()), (2, y[product.to_pi_prime[t]].clone())])
    };

    let through = &y[product.input_default];
    let entry = switch(start);
    let mut alpha: BTreeMap<usize, Rat> = BTreeMap::new();
    *alpha.entry(1).or_insert_with(Rat::zero) += &y[product.input_pi];
    *alpha.entry(2).or_insert_with(Rat::zero) += &y[product.input_pi_prime];
    if !through.is_zero() {
        let entry = entry.clone().ok_or_else(|| Error::InfeasibleSolution("flow enters a dead start state".into()))?;
        for (m, p) in entry {
            *alpha.entry(m).or_insert_with(Rat::zero) += through * p;
        }
    }
    let initial_memory =
        normalize(alpha).ok_or_else(|| Error::InfeasibleSolution("no flow leaves the input state".into()))?;

    let next_move: Vec<Vec<Dist>> = (0..n)
        .map(|s| {
            let m1 = normalize(mdp.enabled(s).iter().map(|&a| (a, y[product.base_action[a]].clone())))
                .unwrap_or_else(|| point_dist(mdp.enabled(s)[0]));
            vec![m1, point_dist(product.pi.choice[s]), point_dist(product.pi_prime.choice[s])]
        })
        .collect();
    let mut memory_update = BTreeMap::new();
    for (a, act) in mdp.actions().iter().enumerate() {
        for t in act.successors() {
            if let Some(d) = switch(t) {
                if d.iter().any(|(m, _)| *m != 0) {
                    memory_update.insert((a, t, 0), d);
                }
            }
        }
    }
    Ok(StochasticUpdateStrategy {
        memory: vec!["m1".into(), "m2".into(), "m2'".into()],
        initial_memory,
        next_move,
        memory_update,
    })
}

fn verify(mdp: &Mdp, start: usize, w: LocalWitness, u: &Rat, v: &Rat) -> Result<LocalAnswer> {
    if w.expectation > *u || w.local_variance > *v {
        return Err(Error::InfeasibleWitness(format!(
            "local witness realizes ({}, {}) which exceeds ({}, {}) from {}",
            format_rational(&w.expectation),
            format_rational(&w.local_variance),
            format_rational(u),
            format_rational(v),
            mdp.state_name(start)
        )));
    }
    Ok(LocalAnswer::Yes(Box::new(w)))
}

fn witness(
    mdp: &Mdp,
    start: usize,
    pair_index: usize,
    product: &ProductMdp,
    system: &ProductSystem,
    assignment: &[Rat],
) -> Result<LocalWitness> {
    let rho = system.flow.solution(assignment);
    let strategy = synthesize_local(mdp, start, product, &rho)?;
    let a = evaluate_strategy(mdp, &strategy, start)?;
    Ok(LocalWitness {
        pair_index,
        pi: product.pi.clone(),
        pi_prime: product.pi_prime.clone(),
        rho,
        expectation: a.expectation,
        local_variance: a.local_variance,
        strategy,
    })
}

/// Whether some strategy from `start` achieves `E[mp] ≤ u` and `E[lv] ≤ v`.
/// Solves one linear program per strategy pair, stopping at the first
/// feasible pair in canonical order.
pub fn check_local(mdp: &Mdp, start: usize, u: &Rat, v: &Rat, pair_budget: Option<usize>) -> Result<LocalAnswer> {
    let budget = pair_budget.unwrap_or(DEFAULT_PAIR_BUDGET);
    let pairs = md_pairs(mdp, budget);
    let feasible = |i: usize| -> Result<Option<(ProductMdp, ProductSystem, Vec<Rat>)>> {
        let (pi, pi_prime) = &pairs[i];
        let product = build_product(mdp, start, pi, pi_prime)?;
        let system = build_product_system(&product);
        let mut lp: LinearProgram = system.flow.lp.clone();
        lp.add_constraint(system.e_row.clone(), Relation::Le, u.clone());
        lp.add_constraint(system.l_row.clone(), Relation::Le, v.clone());
        let out = solve_lp(&lp);
        Ok(out.is_feasible().then_some((product, system, out.assignment)))
    };
    const CHUNK: usize = 32;
    for chunk_start in (0..pairs.len()).step_by(CHUNK) {
        let range: Vec<usize> = (chunk_start..(chunk_start + CHUNK).min(pairs.len())).collect();
        #[cfg(feature = "parallel")]
        let results: Vec<_> = {
            use rayon::prelude::*;
            range.par_iter().map(|&i| feasible(i)).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let results: Vec<_> = range.iter().map(|&i| feasible(i)).collect();
        for (i, r) in range.into_iter().zip(results) {
            if let Some((product, system, assignment)) = r? {
                let w = witness(mdp, start, i, &product, &system, &assignment)?;
                return verify(mdp, start, w, u, v);
            }
        }
    }
    let total = total_pairs(mdp);
    if (pairs.len() as u128) < total {
        Ok(LocalAnswer::BudgetExceeded { checked: pairs.len(), total })
    } else {
        Ok(LocalAnswer::No)
    }
}

/// One strategy pair with its product and the lower hull of `(E, L)`.
#[derive(Debug, Clone)]
pub struct PairHull {
    pub product: ProductMdp,
    pub system: ProductSystem,
    pub hull: Vec<HullPoint<Vec<Rat>>>,
}

/// Per-pair hulls for one (MDP, start); answers many queries without LP solves.
#[derive(Debug, Clone)]
pub struct LocalAnalyzer<'a> {
    mdp: &'a Mdp,
    start: usize,
    pairs: Vec<PairHull>,
    complete: bool,
}

impl<'a> LocalAnalyzer<'a> {
    pub fn new(mdp: &'a Mdp, start: usize, pair_budget: Option<usize>) -> Result<Self> {
        let budget = pair_budget.unwrap_or(DEFAULT_PAIR_BUDGET);
        let pairs = md_pairs(mdp, budget);
        let complete = pairs.len() as u128 >= total_pairs(mdp);
        let build = |(pi, pi_prime): &(MemorylessDeterministicStrategy, MemorylessDeterministicStrategy)| -> Result<PairHull> {
            let product = build_product(mdp, start, pi, pi_prime)?;
            let system = build_product_system(&product);
            let hull = lower_hull_of_lp(&system.flow.lp, &system.e_row, &system.l_row);
            Ok(PairHull { product, system, hull })
        };
        #[cfg(feature = "parallel")]
        let built: Vec<Result<PairHull>> = {
            use rayon::prelude::*;
            pairs.par_iter().map(build).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let built: Vec<Result<PairHull>> = pairs.iter().map(build).collect();
        Ok(LocalAnalyzer { mdp, start, pairs: built.into_iter().collect::<Result<_>>()?, complete })
    }

    pub fn pairs(&self) -> &[PairHull] {
        &self.pairs
    }

    /// Whether every strategy pair fit in the budget.
    pub fn is_complete(&self) -> bool {
        self.complete
    }

    /// First pair whose least local variance over `E ≤ u` is at most `v`.
    pub fn decide(&self, u: &Rat, v: &Rat) -> Option<(usize, HullChoice)> {
        self.pairs.iter().enumerate().find_map(|(i, p)| {
            minimize_on_lower_hull(&p.hull, u, |_, l| l.clone()).filter(|c| c.value <= *v).map(|c| (i, c))
        })
    }

    pub fn witness_from_choice(&self, pair: usize, choice: &HullChoice) -> Result<LocalWitness> {
        let p = &self.pairs[pair];
        let assignment = mix(&p.hull[choice.left].payload, &p.hull[choice.right].payload, &choice.lambda);
        witness(self.mdp, self.start, pair, &p.product, &p.system, &assignment)
    }

    pub fn check(&self, u: &Rat, v: &Rat) -> Result<LocalAnswer> {
        match self.decide(u, v) {
            Some((i, c)) => verify(self.mdp, self.start, self.witness_from_choice(i, &c)?, u, v),
            None if self.complete => Ok(LocalAnswer::No),
            None => Ok(LocalAnswer::BudgetExceeded { checked: self.pairs.len(), total: total_pairs(self.mdp) }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{m_glob, m_uni, md_strategy};
    use crate::numerics::rational::{int, parse_rational, ratio};

    fn q(s: &str) -> Rat {
        parse_rational(s).unwrap()
    }

    #[test]
    fn unichain_md_stats() {
        let mdp = m_uni();
        assert_eq!(md_local_stats(&mdp, &md_strategy(&mdp, &["a", "c"])).unwrap(), vec![(int(1), int(1)); 2]);
        assert_eq!(md_local_stats(&mdp, &md_strategy(&mdp, &["b", "c"])).unwrap(), vec![(int(2), int(0)); 2]);
    }

    #[test]
    fn m_glob_md_stats() {
        let mdp = m_glob();
        let stats = md_local_stats(&mdp, &md_strategy(&mdp, &["a", "b", "c", "e"])).unwrap();
        assert_eq!(stats[0], (ratio(9, 2), int(0)));
        assert_eq!(stats[2], (int(5), int(0)));
        assert_eq!(stats[3], (int(0), int(0)));
    }

    #[test]
    fn unichain_product_rewards() {
        let mdp = m_uni();
        let b = md_strategy(&mdp, &["b", "c"]);
        let a = md_strategy(&mdp, &["a", "c"]);
        let p = build_product(&mdp, 0, &b, &a).unwrap();
        assert_eq!(p.mdp.num_states(), 7);
        for s in 0..2 {
            assert_eq!(p.rewards[p.m2[s]], (int(2), int(0)));
            assert_eq!(p.rewards[p.m2_prime[s]], (int(1), int(1)));
            assert_eq!(p.rewards[p.m1[s]], (int(3), int(5)));
        }
        assert_eq!(p.rewards[p.input], (int(3), int(5)));
        assert_eq!(p.mdp.enabled(p.input).len(), 3);
        assert_eq!(p.mdp.enabled(p.m1[0]).len(), 4);
        assert_eq!(p.mdp.enabled(p.m2[1]).len(), 1);
    }

    #[test]
    fn example2_point() {
        let mdp = m_uni();
        let ans = check_local(&mdp, 0, &q("1.5"), &q("0.5"), None).unwrap();
        let w = ans.witness().expect("yes");
        assert_eq!((w.expectation.clone(), w.local_variance.clone()), (ratio(3, 2), ratio(1, 2)));
        assert_eq!(w.strategy.memory.len(), 3);
        let mut pair = [w.pi.describe(&mdp), w.pi_prime.describe(&mdp)];
        pair.sort();
        assert_ne!(pair[0], pair[1]);
        assert!(check_local(&mdp, 0, &q("1.5"), &q("0.45"), None).unwrap().is_no());
    }

    #[test]
    fn deterministic_optimum() {
        let mdp = m_uni();
        let w = check_local(&mdp, 0, &int(2), &int(0), None).unwrap();
        let w = w.witness().unwrap();
        assert_eq!((w.expectation.clone(), w.local_variance.clone()), (int(2), int(0)));
    }

    #[test]
    fn hull_path_agrees_with_direct_check() {
        for mdp in [m_uni(), m_glob()] {
            let an = LocalAnalyzer::new(&mdp, 0, None).unwrap();
            for u in ["-1", "0", "1", "1.5", "2", "3", "4", "4.5", "5"] {
                for v in ["0", "0.45", "0.5", "1", "2"] {
                    let direct = check_local(&mdp, 0, &q(u), &q(v), None).unwrap();
                    let hull = an.check(&q(u), &q(v)).unwrap();
                    assert_eq!(direct.is_yes(), hull.is_yes(), "({u}, {v})");
                }
            }
        }
    }

    #[test]
    fn all_mass_on_pi_at_input_behaves_like_pi() {
        let mdp = m_uni();
        let b = md_strategy(&mdp, &["b", "c"]);
        let a = md_strategy(&mdp, &["a", "c"]);
        let p = build_product(&mdp, 0, &b, &a).unwrap();
        let mut y_action = vec![Rat::zero(); p.mdp.num_actions()];
        y_action[p.input_pi] = Rat::one();
        let rho = FrequencySolution {
            y_state: vec![Rat::zero(); p.mdp.num_states()],
            y_action,
            x_action: vec![Rat::zero(); p.mdp.num_actions()],
        };
        let s = synthesize_local(&mdp, 0, &p, &rho).unwrap();
        assert_eq!(s.initial_memory, point_dist(1));
        let r = evaluate_strategy(&mdp, &s, 0).unwrap();
        assert_eq!((r.expectation, r.local_variance), (int(2), int(0)));
    }

    #[test]
    fn budget_is_reported() {
        let mdp = m_uni();
        // the only pair within budget is (always-a, always-a)
        match check_local(&mdp, 0, &q("2"), &q("0"), Some(1)).unwrap() {
            LocalAnswer::BudgetExceeded { checked, total } => assert_eq!((checked, total), (1, 3)),
            other => panic!("{other:?}"),
        }
    }
}
