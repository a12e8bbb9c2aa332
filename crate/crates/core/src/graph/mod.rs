//! Qualitative analyses: SCCs, maximal end components, almost-sure winning.

mod mec;
mod reach;
mod scc;

use std::collections::BTreeSet;

pub use mec::{mec_action_membership, mec_decomposition, mec_decomposition_masked, mec_membership, Mec};
pub use reach::{almost_sure_cobuchi, almost_sure_reach, almost_sure_reach_masked, AlmostSure};
pub use scc::{backward_reachable, bottom_sccs, tarjan_scc};

use crate::model::MarkovChain;

/// A bottom strongly connected component of a Markov chain.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Bscc {
    pub locations: BTreeSet<usize>,
}

/// All BSCCs of the chain's edge graph, sorted by smallest location.
pub fn bsccs(chain: &MarkovChain) -> Vec<Bscc> {
    bottom_sccs(&chain.adjacency())
        .into_iter()
        .map(|c| Bscc { locations: c.into_iter().collect() })
        .collect()
}
