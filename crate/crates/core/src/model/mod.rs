//! MDPs, finite-memory strategies and the Markov chains they induce.

mod chain;
mod mdp;
mod strategy;

use std::collections::BTreeSet;

pub use chain::{induce_chain, induce_chain_from_states, Location, MarkovChain};
pub use mdp::{validate_mdp, Action, Mdp, RawAction, RawMdp, SubMdp};
pub(crate) use mdp::restrict;
pub use strategy::{
    enumerate_md_strategies, normalize, point_dist, Dist, MemorySize, MemoryUpdateEntry,
    MemorylessDeterministicStrategy, MemorylessStrategy, NextMoveEntry, StochasticUpdateStrategy, StrategyFile,
};

use crate::graph::{mec_decomposition, Mec};
use crate::numerics::rational::ParseRationalError;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("malformed model description: {0}")]
    Parse(String),
    #[error("state `{0}` has no enabled action")]
    EmptyActSet(String),
    #[error("transition probabilities of action `{action}` sum to {sum}, not 1")]
    BadDistribution { action: String, sum: String },
    #[error("probability of action `{action}` to `{target}` must lie in (0, 1]")]
    BadProbability { action: String, target: String },
    #[error("action `{action}` leads to undeclared state `{target}`")]
    UnknownTarget { action: String, target: String },
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("duplicate identifier `{0}`")]
    DuplicateId(String),
    #[error(transparent)]
    Number(#[from] ParseRationalError),
    #[error("state/action set is not closed under transitions")]
    NotClosed,
    #[error("the given state/action set is not a maximal end component")]
    NotAMec,
    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),
}

/// Restricts `mdp` to one of its maximal end components.
pub fn restrict_to_mec(mdp: &Mdp, mec: &Mec) -> Result<SubMdp, ModelError> {
    if !mec_decomposition(mdp).iter().any(|m| m == mec) {
        return Err(ModelError::NotAMec);
    }
    restrict(mdp, &mec.states, &mec.actions)
}

/// Restricts to an arbitrary closed state/action set (for example an end
/// component that is not maximal).
pub fn restrict_to(mdp: &Mdp, states: &BTreeSet<usize>, actions: &BTreeSet<usize>) -> Result<SubMdp, ModelError> {
    restrict(mdp, states, actions)
}
