//! Exact linear programming and quantitative analysis of Markov chains.

pub mod hull;
pub mod linalg;
pub mod lp;
pub mod markov;
pub mod mean_payoff;
pub mod rational;
pub mod ssp;

pub use lp::{solve_lp, Constraint, Direction, LinearProgram, LpOutcome, LpStatus, Objective, Relation};
pub use markov::{
    analyze_chain, chain_long_run_stats, chain_reach_probabilities, evaluate_strategy, stationary_distribution,
    BsccSummary, ChainAnalysis,
};
pub use mean_payoff::{frequency_lp, mec_payoff_bounds, optimal_frequency, payoff_intervals, PayoffInterval};
pub use rational::Rat;
pub use ssp::{min_cumulative_reward_as_reach, CumulativeReward};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NumericsError {
    #[error("linear system is singular")]
    SingularSystem,
    #[error("target is not almost-surely reachable from state `{0}`")]
    TargetNotAlmostSureReachable(String),
}
