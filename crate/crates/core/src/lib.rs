//! Mean payoff versus variance in finite Markov decision processes.
//!
//! Three notions of variance are supported: the global variance of the
//! mean payoff across runs, the local variance of rewards around each
//! run's own mean payoff, and the hybrid variance around the expected mean
//! payoff. For each, the crate decides whether an (expectation, variance)
//! point is achievable, synthesizes finite-memory witness strategies, and
//! computes the zero-variance optimum. All solver arithmetic is exact.

pub mod fixtures;
pub mod graph;
pub mod model;
pub mod numerics;
pub mod flow;
pub mod global;
pub mod hybrid;
pub mod local;
pub mod pareto;
pub mod zerovar;
pub mod sim;

use model::ModelError;
use numerics::NumericsError;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("eps must be a positive rational")]
    InvalidEps,
    #[error("z = {z} lies outside the payoff interval [{alpha}, {beta}]")]
    ZOutsideInterval { z: String, alpha: String, beta: String },
    #[error("frequency solution cannot be turned into a strategy: {0}")]
    InfeasibleSolution(String),
    #[error("witness does not realize the claimed values: {0}")]
    InfeasibleWitness(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Which variance a query is about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceKind {
    Global,
    Local,
    Hybrid,
}

impl VarianceKind {
    pub const ALL: [VarianceKind; 3] = [VarianceKind::Global, VarianceKind::Local, VarianceKind::Hybrid];

    pub fn name(self) -> &'static str {
        match self {
            VarianceKind::Global => "global",
            VarianceKind::Local => "local",
            VarianceKind::Hybrid => "hybrid",
        }
    }
}

impl std::fmt::Display for VarianceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for VarianceKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        VarianceKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown variance kind `{s}` (expected global, local or hybrid)"))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
