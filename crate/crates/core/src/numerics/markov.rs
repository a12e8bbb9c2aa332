use std::collections::BTreeSet;

use num_traits::{One, Zero};
use serde::Serialize;

use super::linalg::solve;
use super::rational::{serde_rat, Rat};
use super::NumericsError;
use crate::graph::{backward_reachable, bsccs, Bscc};
use crate::model::{induce_chain, MarkovChain, Mdp, StochasticUpdateStrategy};

/// Probability of eventually reaching `target` from every location.
///
/// Locations that cannot reach the target get 0 in a graph prepass, so the
/// remaining system `x = P x` is nonsingular.
pub fn chain_reach_probabilities(chain: &MarkovChain, target: &BTreeSet<usize>) -> Result<Vec<Rat>, NumericsError> {
    let n = chain.len();
    let is_target: Vec<bool> = (0..n).map(|l| target.contains(&l)).collect();
    let can_reach = backward_reachable(&chain.adjacency(), &is_target);
    let maybe: Vec<usize> = (0..n).filter(|&l| can_reach[l] && !is_target[l]).collect();
    let mut pos = vec![usize::MAX; n];
    for (i, &l) in maybe.iter().enumerate() {
        pos[l] = i;
    }
    let k = maybe.len();
    let mut a = vec![vec![Rat::zero(); k]; k];
    let mut b = vec![Rat::zero(); k];
    for (i, &l) in maybe.iter().enumerate() {
        a[i][i] = Rat::one();
        for (t, p) in &chain.edges[l] {
            if is_target[*t] {
                b[i] += p;
            } else if pos[*t] != usize::MAX {
                a[i][pos[*t]] -= p;
            }
        }
    }
    let x = solve(a, b).ok_or(NumericsError::SingularSystem)?;
    Ok((0..n)
        .map(|l| {
            if is_target[l] {
                Rat::one()
            } else if pos[l] != usize::MAX {
                x[pos[l]].clone()
            } else {
                Rat::zero()
            }
        })
        .collect())
}

/// Stationary distribution of the chain restricted to one BSCC.
pub fn stationary_distribution(chain: &MarkovChain, bscc: &Bscc) -> Result<Vec<(usize, Rat)>, NumericsError> {
    let locs: Vec<usize> = bscc.locations.iter().copied().collect();
    let k = locs.len();
    let pos = |l: usize| locs.binary_search(&l).ok();
    // column i holds π_i; row j states π_j = Σ_i π_i P(i, j); last row is Σ π = 1
    let mut a = vec![vec![Rat::zero(); k]; k];
    for (i, &l) in locs.iter().enumerate() {
        a[i][i] -= Rat::one();
        for (t, p) in &chain.edges[l] {
            let j = pos(*t).expect("BSCC is closed");
            a[j][i] += p;
        }
    }
    let mut b = vec![Rat::zero(); k];
    a[k - 1] = vec![Rat::one(); k];
    b[k - 1] = Rat::one();
    let pi = solve(a, b).ok_or(NumericsError::SingularSystem)?;
    Ok(locs.into_iter().zip(pi).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BsccSummary {
    pub locations: Vec<usize>,
    /// Probability of ending up in this BSCC from the chain's initial distribution.
    #[serde(with = "serde_rat")]
    pub probability: Rat,
    #[serde(skip)]
    pub stationary: Vec<(usize, Rat)>,
    #[serde(with = "serde_rat")]
    pub mean_payoff: Rat,
    #[serde(with = "serde_rat")]
    pub local_variance: Rat,
}

/// Exact long-run quantities of a finite Markov chain with rewards.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChainAnalysis {
    pub bsccs: Vec<BsccSummary>,
    /// `E[mp]`
    #[serde(with = "serde_rat")]
    pub expectation: Rat,
    /// `Var[mp]`, the global variance.
    #[serde(with = "serde_rat")]
    pub variance: Rat,
    /// `E[lv]`
    #[serde(with = "serde_rat")]
    pub local_variance: Rat,
    /// `E[hv]`
    #[serde(with = "serde_rat")]
    pub hybrid_variance: Rat,
    /// `E[mp]` for the squared rewards.
    #[serde(with = "serde_rat")]
    pub square_payoff: Rat,
}

impl ChainAnalysis {
    /// Probability mass that ends in some BSCC; always 1 for a finite chain.
    pub fn absorbed_mass(&self) -> Rat {
        self.bsccs.iter().map(|b| b.probability.clone()).sum()
    }
}

/// Analyzes the chain from its initial distribution.
pub fn analyze_chain(chain: &MarkovChain) -> Result<ChainAnalysis, NumericsError> {
    analyze_from(chain, &chain.initial)
}

fn analyze_from(chain: &MarkovChain, initial: &[(usize, Rat)]) -> Result<ChainAnalysis, NumericsError> {
    let mut summaries = Vec::new();
    for bscc in bsccs(chain) {
        let reach = chain_reach_probabilities(chain, &bscc.locations)?;
        let probability: Rat = initial.iter().map(|(l, p)| p * &reach[*l]).sum();
        let stationary = stationary_distribution(chain, &bscc)?;
        let mean_payoff: Rat = stationary.iter().map(|(l, p)| p * &chain.rewards[*l]).sum();
        let local_variance: Rat = stationary
            .iter()
            .map(|(l, p)| {
                let d = &chain.rewards[*l] - &mean_payoff;
                p * &d * &d
            })
            .sum();
        summaries.push(BsccSummary {
            locations: bscc.locations.into_iter().collect(),
            probability,
            stationary,
            mean_payoff,
            local_variance,
        });
    }
    let expectation: Rat = summaries.iter().map(|b| &b.probability * &b.mean_payoff).sum();
    let second: Rat = summaries.iter().map(|b| &b.probability * &b.mean_payoff * &b.mean_payoff).sum();
    let variance = second - &expectation * &expectation;
    let local_variance: Rat = summaries.iter().map(|b| &b.probability * &b.local_variance).sum();
    let square_payoff: Rat = summaries
        .iter()
        .map(|b| {
            let inner: Rat = b.stationary.iter().map(|(l, p)| p * &chain.rewards[*l] * &chain.rewards[*l]).sum();
            &b.probability * inner
        })
        .sum();
    let hybrid_variance = &square_payoff - &expectation * &expectation;
    Ok(ChainAnalysis {
        bsccs: summaries,
        expectation,
        variance,
        local_variance,
        hybrid_variance,
        square_payoff,
    })
}

/// `(E[mp], E[lv])` of the chain started in location `from`.
pub fn chain_long_run_stats(chain: &MarkovChain, from: usize) -> Result<(Rat, Rat), NumericsError> {
    let analysis = analyze_from(chain, &[(from, Rat::one())])?;
    Ok((analysis.expectation, analysis.local_variance))
}

/// Exact analysis of a finite-memory strategy from `start`.
pub fn evaluate_strategy(
    mdp: &Mdp,
    strategy: &StochasticUpdateStrategy,
    start: usize,
) -> Result<ChainAnalysis, NumericsError> {
    analyze_chain(&induce_chain(mdp, strategy, start))
}
