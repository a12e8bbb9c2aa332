use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::{Mdp, ModelError};
use crate::numerics::rational::{format_rational, is_probability_distribution, NumberText, Rat};

/// A finite distribution over indices, sorted by index with positive weights.
pub type Dist = Vec<(usize, Rat)>;

pub fn point_dist(i: usize) -> Dist {
    vec![(i, Rat::one())]
}

/// Normalizes nonnegative weights into a distribution, dropping zeros.
/// Returns `None` when the total weight is zero.
pub fn normalize(weights: impl IntoIterator<Item = (usize, Rat)>) -> Option<Dist> {
    let mut merged: BTreeMap<usize, Rat> = BTreeMap::new();
    for (i, w) in weights {
        if !w.is_zero() {
            *merged.entry(i).or_insert_with(Rat::zero) += w;
        }
    }
    let total: Rat = merged.values().fold(Rat::zero(), |acc, w| acc + w);
    if total.is_zero() {
        return None;
    }
    Some(merged.into_iter().map(|(i, w)| (i, w / &total)).collect())
}

/// `π : S → A` with `π(s) ∈ Act(s)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MemorylessDeterministicStrategy {
    pub choice: Vec<usize>,
}

impl MemorylessDeterministicStrategy {
    pub fn new(mdp: &Mdp, choice: Vec<usize>) -> Result<Self, ModelError> {
        let strategy = MemorylessDeterministicStrategy { choice };
        strategy.validate(mdp)?;
        Ok(strategy)
    }

    /// Picks the first enabled action everywhere.
    pub fn first_actions(mdp: &Mdp) -> Self {
        MemorylessDeterministicStrategy { choice: (0..mdp.num_states()).map(|s| mdp.enabled(s)[0]).collect() }
    }

    pub fn validate(&self, mdp: &Mdp) -> Result<(), ModelError> {
        if self.choice.len() != mdp.num_states() {
            return Err(ModelError::InvalidStrategy("choice vector length differs from state count".into()));
        }
        for (s, &a) in self.choice.iter().enumerate() {
            if a >= mdp.num_actions() || mdp.action(a).source != s {
                return Err(ModelError::InvalidStrategy(format!(
                    "action index {a} is not enabled in state `{}`",
                    mdp.state_name(s)
                )));
            }
        }
        Ok(())
    }

    pub fn to_memoryless(&self) -> MemorylessStrategy {
        MemorylessStrategy { choice: self.choice.iter().map(|&a| point_dist(a)).collect() }
    }

    /// Renders as `s1:a, s2:c` for diagnostics.
    pub fn describe(&self, mdp: &Mdp) -> String {
        self.choice
            .iter()
            .enumerate()
            .map(|(s, &a)| format!("{}:{}", mdp.state_name(s), mdp.action(a).id))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

/// Enumerates all memoryless deterministic strategies in canonical order:
/// lexicographic over the choice vector, state 0 most significant.
pub fn enumerate_md_strategies(mdp: &Mdp) -> impl Iterator<Item = MemorylessDeterministicStrategy> + '_ {
    let n = mdp.num_states();
    let mut digits = vec![0usize; n];
    let mut done = n == 0;
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let current = MemorylessDeterministicStrategy {
            choice: digits.iter().enumerate().map(|(s, &d)| mdp.enabled(s)[d]).collect(),
        };
        // advance the odometer, last state fastest
        let mut pos = n;
        loop {
            if pos == 0 {
                done = true;
                break;
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < mdp.enabled(pos).len() {
                break;
            }
            digits[pos] = 0;
        }
        Some(current)
    })
}

/// A memoryless randomized strategy: one action distribution per state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemorylessStrategy {
    pub choice: Vec<Dist>,
}

impl MemorylessStrategy {
    pub fn validate(&self, mdp: &Mdp) -> Result<(), ModelError> {
        if self.choice.len() != mdp.num_states() {
            return Err(ModelError::InvalidStrategy("choice vector length differs from state count".into()));
        }
        for (s, dist) in self.choice.iter().enumerate() {
            check_action_dist(mdp, s, dist)?;
        }
        Ok(())
    }

    pub fn uniform(mdp: &Mdp) -> Self {
        MemorylessStrategy {
            choice: (0..mdp.num_states())
                .map(|s| normalize(mdp.enabled(s).iter().map(|&a| (a, Rat::one()))).expect("nonempty"))
                .collect(),
        }
    }

    pub fn into_stochastic_update(self) -> StochasticUpdateStrategy {
        StochasticUpdateStrategy {
            memory: vec!["m".to_string()],
            initial_memory: point_dist(0),
            next_move: self.choice.into_iter().map(|d| vec![d]).collect(),
            memory_update: BTreeMap::new(),
        }
    }
}

fn check_action_dist(mdp: &Mdp, s: usize, dist: &Dist) -> Result<(), ModelError> {
    if dist.is_empty() || !is_probability_distribution(dist.iter().map(|(_, p)| p)) {
        return Err(ModelError::InvalidStrategy(format!(
            "action distribution in state `{}` is not a probability distribution",
            mdp.state_name(s)
        )));
    }
    for (a, _) in dist {
        if *a >= mdp.num_actions() || mdp.action(*a).source != s {
            return Err(ModelError::InvalidStrategy(format!(
                "strategy plays action index {a} outside Act(`{}`)",
                mdp.state_name(s)
            )));
        }
    }
    Ok(())
}

/// Memory footprint class of a strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MemorySize {
    Memoryless,
    Two,
    Three,
    K(usize),
}

impl MemorySize {
    pub fn of(size: usize) -> Self {
        match size {
            1 => MemorySize::Memoryless,
            2 => MemorySize::Two,
            3 => MemorySize::Three,
            k => MemorySize::K(k),
        }
    }
}

/// A finite-memory strategy with randomized memory updates.
///
/// `next_move[s][m]` is the action distribution in state `s` under memory `m`.
/// `memory_update[(a, t, m)]` is the distribution over the next memory
/// element after playing `a` in memory `m` and arriving in `t`; missing
/// entries keep the memory unchanged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StochasticUpdateStrategy {
    pub memory: Vec<String>,
    pub initial_memory: Dist,
    pub next_move: Vec<Vec<Dist>>,
    pub memory_update: BTreeMap<(usize, usize, usize), Dist>,
}

impl StochasticUpdateStrategy {
    pub fn memory_size(&self) -> MemorySize {
        MemorySize::of(self.memory.len())
    }

    pub fn next_move(&self, s: usize, m: usize) -> &Dist {
        &self.next_move[s][m]
    }

    /// Distribution over the memory after `(a, t)` from memory `m`.
    pub fn update(&self, a: usize, t: usize, m: usize) -> std::borrow::Cow<'_, Dist> {
        match self.memory_update.get(&(a, t, m)) {
            Some(d) => std::borrow::Cow::Borrowed(d),
            None => std::borrow::Cow::Owned(point_dist(m)),
        }
    }

    pub fn validate(&self, mdp: &Mdp) -> Result<(), ModelError> {
        let k = self.memory.len();
        if k == 0 {
            return Err(ModelError::InvalidStrategy("empty memory set".into()));
        }
        let unique: BTreeSet<&String> = self.memory.iter().collect();
        if unique.len() != k {
            return Err(ModelError::InvalidStrategy("duplicate memory element".into()));
        }
        check_memory_dist(&self.initial_memory, k, "initial memory")?;
        if self.next_move.len() != mdp.num_states() {
            return Err(ModelError::InvalidStrategy("next-move table has wrong state count".into()));
        }
        for (s, row) in self.next_move.iter().enumerate() {
            if row.len() != k {
                return Err(ModelError::InvalidStrategy("next-move table has wrong memory count".into()));
            }
            for dist in row {
                check_action_dist(mdp, s, dist)?;
            }
        }
        for (&(a, t, m), dist) in &self.memory_update {
            if a >= mdp.num_actions() || t >= mdp.num_states() || m >= k {
                return Err(ModelError::InvalidStrategy("memory update refers to unknown index".into()));
            }
            check_memory_dist(dist, k, "memory update")?;
        }
        Ok(())
    }

    /// Drops memory elements that are never used from `start`, renumbering
    /// the remaining ones in their original order.
    pub fn prune_unreachable_memory(&self, mdp: &Mdp, start: usize) -> StochasticUpdateStrategy {
        let chain = super::induce_chain(mdp, self, start);
        let used: BTreeSet<usize> = chain.locations.iter().map(|l| l.memory).collect();
        if used.len() == self.memory.len() {
            return self.clone();
        }
        let remap: BTreeMap<usize, usize> = used.iter().enumerate().map(|(new, &old)| (old, new)).collect();
        let map_dist = |d: &Dist| -> Dist {
            d.iter().filter_map(|(m, p)| remap.get(m).map(|&n| (n, p.clone()))).collect()
        };
        StochasticUpdateStrategy {
            memory: used.iter().map(|&m| self.memory[m].clone()).collect(),
            initial_memory: map_dist(&self.initial_memory),
            next_move: self
                .next_move
                .iter()
                .map(|row| used.iter().map(|&m| row[m].clone()).collect())
                .collect(),
            memory_update: self
                .memory_update
                .iter()
                .filter_map(|(&(a, t, m), d)| remap.get(&m).map(|&nm| ((a, t, nm), map_dist(d))))
                .filter(|(_, d)| !d.is_empty())
                .collect(),
        }
    }

    pub fn to_file(&self, mdp: &Mdp) -> StrategyFile {
        let dist_names = |d: &Dist, name: &dyn Fn(usize) -> String| -> BTreeMap<String, NumberText> {
            d.iter().map(|(i, p)| (name(*i), NumberText::Text(format_rational(p)))).collect()
        };
        let mem_name = |m: usize| self.memory[m].clone();
        let act_name = |a: usize| mdp.action(a).id.clone();
        let mut next_move = Vec::new();
        for (s, row) in self.next_move.iter().enumerate() {
            for (m, dist) in row.iter().enumerate() {
                next_move.push(NextMoveEntry {
                    state: mdp.state_name(s).to_string(),
                    memory: self.memory[m].clone(),
                    dist: dist_names(dist, &act_name),
                });
            }
        }
        let memory_update = self
            .memory_update
            .iter()
            .map(|(&(a, t, m), d)| MemoryUpdateEntry {
                action: mdp.action(a).id.clone(),
                state: mdp.state_name(t).to_string(),
                memory: self.memory[m].clone(),
                dist: dist_names(d, &mem_name),
            })
            .collect();
        StrategyFile {
            memory: self.memory.clone(),
            initial_memory: dist_names(&self.initial_memory, &mem_name),
            next_move,
            memory_update,
        }
    }

    pub fn to_json_string(&self, mdp: &Mdp) -> String {
        serde_json::to_string_pretty(&self.to_file(mdp)).expect("strategy serializes")
    }

    pub fn from_json_str(mdp: &Mdp, text: &str) -> Result<Self, ModelError> {
        let file: StrategyFile = serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
        file.resolve(mdp)
    }
}

fn check_memory_dist(dist: &Dist, k: usize, what: &str) -> Result<(), ModelError> {
    if dist.is_empty()
        || dist.iter().any(|(m, _)| *m >= k)
        || !is_probability_distribution(dist.iter().map(|(_, p)| p))
    {
        return Err(ModelError::InvalidStrategy(format!("{what} is not a distribution over memory")));
    }
    Ok(())
}

/// On-disk strategy format. Missing `next_move` entries are an error;
/// missing `memory_update` entries keep the memory unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyFile {
    pub memory: Vec<String>,
    pub initial_memory: BTreeMap<String, NumberText>,
    pub next_move: Vec<NextMoveEntry>,
    #[serde(default)]
    pub memory_update: Vec<MemoryUpdateEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextMoveEntry {
    pub state: String,
    pub memory: String,
    pub dist: BTreeMap<String, NumberText>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryUpdateEntry {
    pub action: String,
    pub state: String,
    pub memory: String,
    pub dist: BTreeMap<String, NumberText>,
}

impl StrategyFile {
    pub fn resolve(&self, mdp: &Mdp) -> Result<StochasticUpdateStrategy, ModelError> {
        let k = self.memory.len();
        let mem_index = |name: &str| -> Result<usize, ModelError> {
            self.memory
                .iter()
                .position(|m| m == name)
                .ok_or_else(|| ModelError::InvalidStrategy(format!("unknown memory element `{name}`")))
        };
        let act_index = |name: &str| -> Result<usize, ModelError> {
            mdp.action_index(name).ok_or_else(|| ModelError::InvalidStrategy(format!("unknown action `{name}`")))
        };
        let parse_dist = |d: &BTreeMap<String, NumberText>,
                          index: &dyn Fn(&str) -> Result<usize, ModelError>|
         -> Result<Dist, ModelError> {
            let mut out = Vec::with_capacity(d.len());
            for (name, p) in d {
                out.push((index(name)?, p.parse()?));
            }
            out.sort_by_key(|(i, _)| *i);
            out.retain(|(_, p)| !p.is_zero());
            Ok(out)
        };

        let initial_memory = parse_dist(&self.initial_memory, &mem_index)?;
        let mut next_move: Vec<Vec<Option<Dist>>> = vec![vec![None; k]; mdp.num_states()];
        for entry in &self.next_move {
            let s = mdp.require_state(&entry.state)?;
            let m = mem_index(&entry.memory)?;
            next_move[s][m] = Some(parse_dist(&entry.dist, &act_index)?);
        }
        let next_move = next_move
            .into_iter()
            .enumerate()
            .map(|(s, row)| {
                row.into_iter()
                    .enumerate()
                    .map(|(m, d)| {
                        d.ok_or_else(|| {
                            ModelError::InvalidStrategy(format!(
                                "no next move for state `{}` in memory `{}`",
                                mdp.state_name(s),
                                self.memory[m]
                            ))
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut memory_update = BTreeMap::new();
        for entry in &self.memory_update {
            let a = act_index(&entry.action)?;
            let t = mdp.require_state(&entry.state)?;
            let m = mem_index(&entry.memory)?;
            memory_update.insert((a, t, m), parse_dist(&entry.dist, &mem_index)?);
        }
        let strategy = StochasticUpdateStrategy { memory: self.memory.clone(), initial_memory, next_move, memory_update };
        strategy.validate(mdp)?;
        Ok(strategy)
    }
}
