//! Shared generators and brute-force oracles for the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use mdpstab::model::{validate_mdp, Dist, Mdp, MemorylessStrategy, RawAction, RawMdp, StochasticUpdateStrategy};
use mdpstab::numerics::rational::{ratio, NumberText, Rat};
use mdpstab::numerics::{Direction, LinearProgram, Relation};
use num_traits::{One, Zero};
use proptest::prelude::*;

/// One action: reward and positive weights over successor states.
#[derive(Debug, Clone)]
pub struct ActionSpec {
    pub reward: i64,
    pub weights: Vec<(usize, i64)>,
}

pub type MdpSpec = Vec<Vec<ActionSpec>>;

pub fn build_mdp(spec: &MdpSpec) -> Mdp {
    let name = |s: usize| format!("s{s}");
    let mut actions = Vec::new();
    for (s, acts) in spec.iter().enumerate() {
        for (k, a) in acts.iter().enumerate() {
            let total: i64 = a.weights.iter().map(|(_, w)| w).sum();
            let transitions: BTreeMap<String, NumberText> = a
                .weights
                .iter()
                .map(|&(t, w)| (name(t), NumberText::Text(format!("{w}/{total}"))))
                .collect();
            actions.push(RawAction {
                id: format!("a{s}_{k}"),
                source: name(s),
                reward: NumberText::Text(a.reward.to_string()),
                transitions,
            });
        }
    }
    let raw = RawMdp { states: (0..spec.len()).map(name).collect(), initial: name(0), actions };
    validate_mdp(&raw).expect("generated MDP is valid")
}

fn action_spec(n: usize, rewards: std::ops::RangeInclusive<i64>) -> impl Strategy<Value = ActionSpec> {
    (rewards, 1u32..(1u32 << n), proptest::collection::vec(1i64..=3, n)).prop_map(move |(reward, mask, w)| ActionSpec {
        reward,
        weights: (0..n).filter(|t| mask & (1 << t) != 0).map(|t| (t, w[t])).collect(),
    })
}

/// Random MDPs with `1..=max_states` states, up to `max_actions` actions per
/// state, rewards in `rewards`.
pub fn arb_mdp_spec(
    max_states: usize,
    max_actions: usize,
    rewards: std::ops::RangeInclusive<i64>,
) -> impl Strategy<Value = MdpSpec> {
    (1..=max_states).prop_flat_map(move |n| {
        proptest::collection::vec(proptest::collection::vec(action_spec(n, rewards.clone()), 1..=max_actions), n)
    })
}

pub fn arb_mdp(max_states: usize) -> impl Strategy<Value = Mdp> {
    arb_mdp_spec(max_states, 2, 0..=4).prop_map(|s| build_mdp(&s))
}

/// Random weights turned into a distribution over `items`.
fn dist_from(items: &[usize], weights: &[u8]) -> Dist {
    let mut d: Dist = items
        .iter()
        .zip(weights.iter().cycle())
        .filter(|(_, &w)| w > 0)
        .map(|(&i, &w)| (i, Rat::from_integer(w.into())))
        .collect();
    if d.is_empty() {
        d.push((items[0], Rat::one()));
    }
    let total: Rat = d.iter().map(|(_, w)| w.clone()).sum();
    for (_, w) in d.iter_mut() {
        *w /= total.clone();
    }
    d
}

pub fn memoryless_from(mdp: &Mdp, weights: &[u8]) -> MemorylessStrategy {
    MemorylessStrategy {
        choice: (0..mdp.num_states())
            .map(|s| {
                let off = s * 3 % weights.len().max(1);
                dist_from(mdp.enabled(s), &weights[off..])
            })
            .collect(),
    }
}

/// A two-memory stochastic-update strategy built from a byte stream.
pub fn two_memory_from(mdp: &Mdp, weights: &[u8]) -> StochasticUpdateStrategy {
    let at = |i: usize| &weights[i % weights.len()..];
    let next_move: Vec<Vec<Dist>> = (0..mdp.num_states())
        .map(|s| (0..2).map(|m| dist_from(mdp.enabled(s), at(5 * s + 7 * m))).collect())
        .collect();
    let mut memory_update = BTreeMap::new();
    for a in 0..mdp.num_actions() {
        for (t, _) in &mdp.action(a).transitions {
            for m in 0..2 {
                let d = dist_from(&[0, 1], at(3 * a + 11 * t + m));
                memory_update.insert((a, *t, m), d);
            }
        }
    }
    StochasticUpdateStrategy {
        memory: vec!["m0".into(), "m1".into()],
        initial_memory: dist_from(&[0, 1], at(1)),
        next_move,
        memory_update,
    }
}

pub fn weight_bytes() -> impl Strategy<Value = Vec<u8>> {
    proptest::collection::vec(0u8..4, 8..24).prop_filter("some weight", |w| w.iter().any(|&x| x > 0))
}

/// All maximal end components by enumerating every action subset.
pub fn brute_force_mecs(mdp: &Mdp) -> BTreeSet<(BTreeSet<usize>, BTreeSet<usize>)> {
    let k = mdp.num_actions();
    assert!(k <= 16, "oracle is exponential in the number of actions");
    let mut ecs: Vec<(BTreeSet<usize>, BTreeSet<usize>)> = Vec::new();
    for mask in 1u32..(1u32 << k) {
        let acts: BTreeSet<usize> = (0..k).filter(|a| mask & (1 << a) != 0).collect();
        let states: BTreeSet<usize> = acts.iter().map(|&a| mdp.action(a).source).collect();
        let closed = acts.iter().all(|&a| mdp.action(a).transitions.iter().all(|(t, _)| states.contains(t)));
        if closed && strongly_connected(mdp, &states, &acts) {
            ecs.push((states, acts));
        }
    }
    let contains = |big: &(BTreeSet<usize>, BTreeSet<usize>), small: &(BTreeSet<usize>, BTreeSet<usize>)| {
        small.1.is_subset(&big.1)
    };
    ecs.iter()
        .filter(|e| !ecs.iter().any(|f| f != *e && contains(f, e)))
        .cloned()
        .collect()
}

fn strongly_connected(mdp: &Mdp, states: &BTreeSet<usize>, acts: &BTreeSet<usize>) -> bool {
    let reach = |from: usize, forward: bool| {
        let mut seen = BTreeSet::from([from]);
        let mut stack = vec![from];
        while let Some(s) = stack.pop() {
            for &a in acts {
                let act = mdp.action(a);
                for (t, _) in &act.transitions {
                    let (x, y) = if forward { (act.source, *t) } else { (*t, act.source) };
                    if x == s && seen.insert(y) {
                        stack.push(y);
                    }
                }
            }
        }
        seen
    };
    let first = *states.iter().next().unwrap();
    reach(first, true) == *states && reach(first, false) == *states
}

/// A small LP `max/min c·x` s.t. `A x ≤ b`, `0 ≤ x ≤ box`.
#[derive(Debug, Clone)]
pub struct SmallLp {
    pub n: usize,
    pub rows: Vec<(Vec<i64>, i64)>,
    pub objective: Vec<i64>,
    pub maximize: bool,
    pub bound: i64,
}

pub fn arb_small_lp() -> impl Strategy<Value = SmallLp> {
    (1usize..=4).prop_flat_map(|n| {
        (
            proptest::collection::vec((proptest::collection::vec(-3i64..=3, n), -4i64..=8), 0..=4),
            proptest::collection::vec(-3i64..=3, n),
            any::<bool>(),
            1i64..=5,
        )
            .prop_map(move |(rows, objective, maximize, bound)| SmallLp { n, rows, objective, maximize, bound })
    })
}

impl SmallLp {
    pub fn to_lp(&self) -> LinearProgram {
        let mut lp = LinearProgram::new();
        for i in 0..self.n {
            lp.add_variable(format!("x{i}"), true);
        }
        let coeffs = |row: &[i64]| row.iter().enumerate().map(|(i, &c)| (i, Rat::from_integer(c.into()))).collect();
        for (row, b) in &self.rows {
            lp.add_constraint(coeffs(row), Relation::Le, Rat::from_integer((*b).into()));
        }
        for i in 0..self.n {
            lp.add_constraint(vec![(i, Rat::one())], Relation::Le, Rat::from_integer(self.bound.into()));
        }
        let dir = if self.maximize { Direction::Maximize } else { Direction::Minimize };
        lp.set_objective(dir, coeffs(&self.objective));
        lp
    }

    /// All constraints as `a·x ≤ b`, including `−x ≤ 0` and the box.
    fn all_rows(&self) -> Vec<(Vec<Rat>, Rat)> {
        let r = |v: i64| Rat::from_integer(v.into());
        let mut rows: Vec<(Vec<Rat>, Rat)> =
            self.rows.iter().map(|(a, b)| (a.iter().map(|&x| r(x)).collect(), r(*b))).collect();
        for i in 0..self.n {
            let mut e = vec![Rat::zero(); self.n];
            e[i] = -Rat::one();
            rows.push((e.clone(), Rat::zero()));
            e[i] = Rat::one();
            rows.push((e, r(self.bound)));
        }
        rows
    }

    /// Optimum by enumerating every vertex; `None` when infeasible.
    pub fn vertex_oracle(&self) -> Option<Rat> {
        let rows = self.all_rows();
        let obj: Vec<Rat> = self.objective.iter().map(|&c| Rat::from_integer(c.into())).collect();
        let mut best: Option<Rat> = None;
        for subset in subsets(rows.len(), self.n) {
            let a: Vec<Vec<Rat>> = subset.iter().map(|&i| rows[i].0.clone()).collect();
            let b: Vec<Rat> = subset.iter().map(|&i| rows[i].1.clone()).collect();
            let Some(x) = solve_square(a, b) else { continue };
            let feasible = rows.iter().all(|(row, rhs)| dot(row, &x) <= *rhs);
            if !feasible {
                continue;
            }
            let val = dot(&obj, &x);
            best = Some(match best {
                None => val,
                Some(cur) => {
                    if (self.maximize && val > cur) || (!self.maximize && val < cur) {
                        val
                    } else {
                        cur
                    }
                }
            });
        }
        best
    }
}

fn dot(a: &[Rat], x: &[Rat]) -> Rat {
    a.iter().zip(x).map(|(p, q)| p * q).sum()
}

fn subsets(m: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            cur.push(i);
            go(i + 1, m, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, m, k, &mut Vec::new(), &mut out);
    out
}

/// Gauss–Jordan on a square system; `None` when singular.
fn solve_square(mut a: Vec<Vec<Rat>>, mut b: Vec<Rat>) -> Option<Vec<Rat>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, piv);
        b.swap(col, piv);
        let p = a[col][col].clone();
        for j in 0..n {
            a[col][j] = &a[col][j] / &p;
        }
        b[col] = &b[col] / &p;
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for j in 0..n {
                    let delta = &f * &a[col][j];
                    a[r][j] -= delta;
                }
                let delta = &f * &b[col];
                b[r] -= delta;
            }
        }
    }
    Some(b)
}

pub fn half() -> Rat {
    ratio(1, 2)
}
