use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::numerics::rational::{format_rational, sum, NumberText, Rat};

/// An action with its (unique) source state, reward and successor distribution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Action {
    pub id: String,
    pub source: usize,
    pub reward: Rat,
    /// Successor distribution, sorted by target state index.
    pub transitions: Vec<(usize, Rat)>,
}

impl Action {
    pub fn successors(&self) -> impl Iterator<Item = usize> + '_ {
        self.transitions.iter().map(|(t, _)| *t)
    }

    pub fn probability_to(&self, target: usize) -> Rat {
        self.transitions
            .iter()
            .find(|(t, _)| *t == target)
            .map(|(_, p)| p.clone())
            .unwrap_or_else(Rat::zero)
    }
}

/// A validated finite MDP with rational rewards and probabilities.
///
/// States and actions are stored in lexicographic order of their identifiers;
/// all indices used across the crate refer to that order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mdp {
    states: Vec<String>,
    actions: Vec<Action>,
    initial: usize,
    enabled: Vec<Vec<usize>>,
    state_index: HashMap<String, usize>,
    action_index: HashMap<String, usize>,
}

/// The JSON model description before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawMdp {
    pub states: Vec<String>,
    pub initial: String,
    pub actions: Vec<RawAction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawAction {
    pub id: String,
    pub source: String,
    pub reward: NumberText,
    pub transitions: BTreeMap<String, NumberText>,
}

impl RawMdp {
    pub fn from_json_str(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))
    }
}

pub fn validate_mdp(raw: &RawMdp) -> Result<Mdp, ModelError> {
    let mut seen = BTreeSet::new();
    for s in &raw.states {
        if !seen.insert(s.as_str()) {
            return Err(ModelError::DuplicateId(s.clone()));
        }
    }
    let mut state_names: Vec<String> = raw.states.clone();
    state_names.sort();
    let state_index: HashMap<String, usize> =
        state_names.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();

    let initial = *state_index
        .get(&raw.initial)
        .ok_or_else(|| ModelError::UnknownState(raw.initial.clone()))?;

    let mut raw_actions: Vec<&RawAction> = raw.actions.iter().collect();
    raw_actions.sort_by(|a, b| a.id.cmp(&b.id));
    let mut actions = Vec::with_capacity(raw_actions.len());
    let mut action_ids = BTreeSet::new();
    for ra in raw_actions {
        if !action_ids.insert(ra.id.as_str()) {
            return Err(ModelError::DuplicateId(ra.id.clone()));
        }
        let source = *state_index
            .get(&ra.source)
            .ok_or_else(|| ModelError::UnknownState(ra.source.clone()))?;
        let reward = ra.reward.parse()?;
        let mut transitions = Vec::with_capacity(ra.transitions.len());
        for (target, prob) in &ra.transitions {
            let t = *state_index.get(target).ok_or_else(|| ModelError::UnknownTarget {
                action: ra.id.clone(),
                target: target.clone(),
            })?;
            let p = prob.parse()?;
            if !p.is_positive() || p > Rat::one() {
                return Err(ModelError::BadProbability { action: ra.id.clone(), target: target.clone() });
            }
            transitions.push((t, p));
        }
        transitions.sort_by_key(|(t, _)| *t);
        let total = sum(transitions.iter().map(|(_, p)| p));
        if !total.is_one() {
            return Err(ModelError::BadDistribution { action: ra.id.clone(), sum: format_rational(&total) });
        }
        actions.push(Action { id: ra.id.clone(), source, reward, transitions });
    }

    Mdp::from_parts(state_names, actions, initial)
}

impl Mdp {
    /// Builds an MDP from already-indexed parts. Actions must be sorted by id
    /// and states by name for the canonical-order guarantee to hold.
    pub(crate) fn from_parts(states: Vec<String>, actions: Vec<Action>, initial: usize) -> Result<Self, ModelError> {
        let mut enabled = vec![Vec::new(); states.len()];
        for (i, a) in actions.iter().enumerate() {
            enabled[a.source].push(i);
        }
        if let Some(s) = enabled.iter().position(|acts| acts.is_empty()) {
            return Err(ModelError::EmptyActSet(states[s].clone()));
        }
        let state_index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        let action_index = actions.iter().enumerate().map(|(i, a)| (a.id.clone(), i)).collect();
        Ok(Mdp { states, actions, initial, enabled, state_index, action_index })
    }

    pub fn from_json_str(text: &str) -> Result<Self, ModelError> {
        validate_mdp(&RawMdp::from_json_str(text)?)
    }

    pub fn to_raw(&self) -> RawMdp {
        RawMdp {
            states: self.states.clone(),
            initial: self.states[self.initial].clone(),
            actions: self
                .actions
                .iter()
                .map(|a| RawAction {
                    id: a.id.clone(),
                    source: self.states[a.source].clone(),
                    reward: NumberText::from(&a.reward),
                    transitions: a
                        .transitions
                        .iter()
                        .map(|(t, p)| (self.states[*t].clone(), NumberText::from(p)))
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_raw()).expect("raw MDP serializes")
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn state_name(&self, s: usize) -> &str {
        &self.states[s]
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.state_index.get(name).copied()
    }

    pub fn action_index(&self, id: &str) -> Option<usize> {
        self.action_index.get(id).copied()
    }

    pub fn require_state(&self, name: &str) -> Result<usize, ModelError> {
        self.state_index(name).ok_or_else(|| ModelError::UnknownState(name.to_string()))
    }

    pub fn action(&self, a: usize) -> &Action {
        &self.actions[a]
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn enabled(&self, s: usize) -> &[usize] {
        &self.enabled[s]
    }

    pub fn reward(&self, a: usize) -> &Rat {
        &self.actions[a].reward
    }

    pub fn min_reward(&self) -> Rat {
        self.actions.iter().map(|a| &a.reward).min().cloned().unwrap_or_else(Rat::zero)
    }

    pub fn max_reward(&self) -> Rat {
        self.actions.iter().map(|a| &a.reward).max().cloned().unwrap_or_else(Rat::zero)
    }

    /// `max |r(a)|`, the constant bounding both expectations and variances.
    pub fn max_abs_reward(&self) -> Rat {
        self.actions.iter().map(|a| a.reward.abs()).max().unwrap_or_else(Rat::zero)
    }

    /// Distinct reward values in increasing order.
    pub fn distinct_rewards(&self) -> Vec<Rat> {
        let set: BTreeSet<&Rat> = self.actions.iter().map(|a| &a.reward).collect();
        set.into_iter().cloned().collect()
    }

    /// Returns a copy with a different initial state.
    pub fn with_initial(&self, initial: usize) -> Mdp {
        let mut copy = self.clone();
        copy.initial = initial;
        copy
    }

    /// Number of memoryless deterministic strategies, saturating.
    pub fn count_md_strategies(&self) -> u128 {
        self.enabled
            .iter()
            .fold(1u128, |acc, acts| acc.saturating_mul(acts.len() as u128))
    }
}

/// A sub-MDP together with index maps back into its parent.
#[derive(Debug, Clone)]
pub struct SubMdp {
    pub mdp: Mdp,
    /// `state_map[i]` is the parent index of sub-state `i`.
    pub state_map: Vec<usize>,
    pub action_map: Vec<usize>,
}

impl SubMdp {
    pub fn parent_state(&self, s: usize) -> usize {
        self.state_map[s]
    }

    pub fn parent_action(&self, a: usize) -> usize {
        self.action_map[a]
    }

    pub fn local_state(&self, parent: usize) -> Option<usize> {
        self.state_map.iter().position(|&p| p == parent)
    }
}

/// Restricts `mdp` to a closed state/action set. Fails if some action leaves
/// `states` or some state is left without actions.
pub(crate) fn restrict(mdp: &Mdp, states: &BTreeSet<usize>, actions: &BTreeSet<usize>) -> Result<SubMdp, ModelError> {
    let state_map: Vec<usize> = states.iter().copied().collect();
    let local: HashMap<usize, usize> = state_map.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let action_map: Vec<usize> = actions.iter().copied().collect();
    let mut sub_actions = Vec::with_capacity(action_map.len());
    for &a in &action_map {
        let act = mdp.action(a);
        let source = *local.get(&act.source).ok_or(ModelError::NotClosed)?;
        let mut transitions = Vec::with_capacity(act.transitions.len());
        for (t, p) in &act.transitions {
            let lt = *local.get(t).ok_or(ModelError::NotClosed)?;
            transitions.push((lt, p.clone()));
        }
        sub_actions.push(Action { id: act.id.clone(), source, reward: act.reward.clone(), transitions });
    }
    let names = state_map.iter().map(|&s| mdp.state_name(s).to_string()).collect();
    let initial = local.get(&mdp.initial()).copied().unwrap_or(0);
    let sub = Mdp::from_parts(names, sub_actions, initial)?;
    Ok(SubMdp { mdp: sub, state_map, action_map })
}
