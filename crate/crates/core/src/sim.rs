//! Monte Carlo estimation of mean payoff and the three variances.
//!
//! Runs are truncated at a finite horizon; the first `burn_in` steps are
//! discarded. Each run draws from its own ChaCha stream (`seed`, run index),
//! and per-run results are combined by pairwise summation in run order, so
//! the statistics are bitwise reproducible regardless of thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Dist, Mdp, StochasticUpdateStrategy};
use crate::numerics::markov::ChainAnalysis;
use crate::numerics::rational::to_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub runs: usize,
    pub horizon: usize,
    pub seed: u64,
    /// Steps discarded at the start of each run; `None` means `horizon / 10`.
    pub burn_in: Option<usize>,
}

impl SimConfig {
    pub fn new(runs: usize, horizon: usize, seed: u64) -> Self {
        assert!(runs >= 1 && horizon >= 1, "need at least one run of at least one step");
        SimConfig { runs, horizon, seed, burn_in: None }
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in.unwrap_or(self.horizon / 10).min(self.horizon - 1)
    }
}

/// Finite-horizon estimates of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunEstimate {
    /// Average reward.
    pub mp: f64,
    /// Average squared reward.
    pub m2: f64,
}

impl RunEstimate {
    /// Average squared deviation from the run's own average.
    pub fn lv(&self) -> f64 {
        (self.m2 - self.mp * self.mp).max(0.0)
    }

    /// Average squared deviation from `center`.
    pub fn hv(&self, center: f64) -> f64 {
        (self.m2 - 2.0 * center * self.mp + center * center).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunStatistics {
    pub config: SimConfig,
    pub mean_payoff: f64,
    pub mean_payoff_se: f64,
    /// Sample variance of the per-run mean payoffs.
    pub variance: f64,
    pub variance_se: f64,
    pub local_variance: f64,
    pub local_variance_se: f64,
    /// Centered on the simulated `E[mp]`.
    pub hybrid_variance: f64,
    pub hybrid_variance_se: f64,
    /// Centered on a supplied exact `E[mp]`, when one was given.
    pub hybrid_variance_exact_center: Option<f64>,
    #[serde(skip)]
    pub runs: Vec<RunEstimate>,
}

/// Sampling tables in `f64`, cumulative for inverse-CDF draws.
struct Sampler {
    transitions: Vec<Vec<(usize, f64)>>,
    rewards: Vec<f64>,
    next_move: Vec<Vec<Vec<(usize, f64)>>>,
    update: std::collections::HashMap<(usize, usize, usize), Vec<(usize, f64)>>,
    initial_memory: Vec<(usize, f64)>,
}

fn cumulative(dist: &Dist) -> Vec<(usize, f64)> {
    let mut acc = 0.0;
    dist.iter()
        .map(|(i, p)| {
            acc += to_f64(p);
            (*i, acc)
        })
        .collect()
}

fn draw(table: &[(usize, f64)], rng: &mut ChaCha8Rng) -> usize {
    if table.len() == 1 {
        return table[0].0;
    }
    let total = table.last().expect("nonempty").1;
    let x: f64 = rng.gen::<f64>() * total;
    table.iter().find(|(_, c)| x < *c).unwrap_or(table.last().unwrap()).0
}

impl Sampler {
    fn new(mdp: &Mdp, strategy: &StochasticUpdateStrategy) -> Self {
        Sampler {
            transitions: mdp.actions().iter().map(|a| cumulative(&a.transitions)).collect(),
            rewards: (0..mdp.num_actions()).map(|a| to_f64(mdp.reward(a))).collect(),
            next_move: strategy.next_move.iter().map(|row| row.iter().map(cumulative).collect()).collect(),
            update: strategy.memory_update.iter().map(|(k, d)| (*k, cumulative(d))).collect(),
            initial_memory: cumulative(&strategy.initial_memory),
        }
    }

    fn run(&self, start: usize, horizon: usize, burn_in: usize, rng: &mut ChaCha8Rng) -> RunEstimate {
        let mut s = start;
        let mut m = draw(&self.initial_memory, rng);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for step in 0..horizon {
            let a = draw(&self.next_move[s][m], rng);
            if step >= burn_in {
                let r = self.rewards[a];
                sum += r;
                sum_sq += r * r;
            }
            let t = draw(&self.transitions[a], rng);
            if let Some(table) = self.update.get(&(a, t, m)) {
                m = draw(table, rng);
            }
            s = t;
        }
        let n = (horizon - burn_in) as f64;
        RunEstimate { mp: sum / n, m2: sum_sq / n }
    }
}

/// Sum in a fixed tree shape so the result does not depend on scheduling.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n if n <= 8 => values.iter().sum(),
        n => pairwise_sum(&values[..n / 2]) + pairwise_sum(&values[n / 2..]),
    }
}

fn mean(values: &[f64]) -> f64 {
    pairwise_sum(values) / values.len() as f64
}

/// Mean and its standard error.
fn mean_se(values: &[f64]) -> (f64, f64) {
    let mu = mean(values);
    if values.len() < 2 {
        return (mu, 0.0);
    }
    let dev: Vec<f64> = values.iter().map(|x| (x - mu) * (x - mu)).collect();
    let var = pairwise_sum(&dev) / (values.len() - 1) as f64;
    (mu, (var / values.len() as f64).sqrt())
}

/// Unbiased sample variance and its standard error from the fourth moment.
fn variance_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.len() < 2 {
        return (0.0, 0.0);
    }
    let mu = mean(values);
    let sq: Vec<f64> = values.iter().map(|x| (x - mu) * (x - mu)).collect();
    let quad: Vec<f64> = sq.iter().map(|d| d * d).collect();
    let s2 = pairwise_sum(&sq) / (n - 1.0);
    let m4 = pairwise_sum(&quad) / n;
    let var_of_s2 = ((m4 - s2 * s2 * (n - 3.0) / (n - 1.0)) / n).max(0.0);
    (s2, var_of_s2.sqrt())
}

pub fn simulate(mdp: &Mdp, strategy: &StochasticUpdateStrategy, start: usize, cfg: &SimConfig) -> RunStatistics {
    simulate_with_reference(mdp, strategy, start, cfg, None)
}

/// Like [`simulate`], additionally reporting the hybrid variance centered on
/// `exact_mean`.
pub fn simulate_with_reference(
    mdp: &Mdp,
    strategy: &StochasticUpdateStrategy,
    start: usize,
    cfg: &SimConfig,
    exact_mean: Option<f64>,
) -> RunStatistics {
    let sampler = Sampler::new(mdp, strategy);
    let burn_in = cfg.burn_in();
    let one = |i: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(i as u64);
        sampler.run(start, cfg.horizon, burn_in, &mut rng)
    };
    #[cfg(feature = "parallel")]
    let runs: Vec<RunEstimate> = {
        use rayon::prelude::*;
        (0..cfg.runs).into_par_iter().map(one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let runs: Vec<RunEstimate> = (0..cfg.runs).map(one).collect();

    let mps: Vec<f64> = runs.iter().map(|r| r.mp).collect();
    let (mean_payoff, mean_payoff_se) = mean_se(&mps);
    let (variance, variance_se) = variance_se(&mps);
    let lvs: Vec<f64> = runs.iter().map(RunEstimate::lv).collect();
    let (local_variance, local_variance_se) = mean_se(&lvs);
    let hvs: Vec<f64> = runs.iter().map(|r| r.hv(mean_payoff)).collect();
    let (hybrid_variance, hybrid_variance_se) = mean_se(&hvs);
    let hybrid_variance_exact_center = exact_mean.map(|e| {
        let v: Vec<f64> = runs.iter().map(|r| r.hv(e)).collect();
        mean(&v)
    });
    RunStatistics {
        config: *cfg,
        mean_payoff,
        mean_payoff_se,
        variance,
        variance_se,
        local_variance,
        local_variance_se,
        hybrid_variance,
        hybrid_variance_se,
        hybrid_variance_exact_center,
        runs,
    }
}

/// Exact values to compare against, in `f64`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactValues {
    pub mean_payoff: f64,
    pub variance: f64,
    pub local_variance: f64,
    pub hybrid_variance: f64,
}

impl From<&ChainAnalysis> for ExactValues {
    fn from(a: &ChainAnalysis) -> Self {
        ExactValues {
            mean_payoff: to_f64(&a.expectation),
            variance: to_f64(&a.variance),
            local_variance: to_f64(&a.local_variance),
            hybrid_variance: to_f64(&a.hybrid_variance),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub mean_payoff: f64,
    pub variance: f64,
    pub local_variance: f64,
    pub hybrid_variance: f64,
}

impl Tolerances {
    pub fn uniform(tol: f64) -> Self {
        Tolerances { mean_payoff: tol, variance: tol, local_variance: tol, hybrid_variance: tol }
    }

    /// `max(k·stderr, floor)` per quantity.
    pub fn from_stderr(report: &RunStatistics, k: f64, floor: f64) -> Self {
        Tolerances {
            mean_payoff: (k * report.mean_payoff_se).max(floor),
            variance: (k * report.variance_se).max(floor),
            local_variance: (k * report.local_variance_se).max(floor),
            hybrid_variance: (k * report.hybrid_variance_se).max(floor),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub quantity: &'static str,
    pub estimate: f64,
    pub exact: f64,
    pub difference: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Absolute-difference comparison per quantity.
pub fn compare_exact(report: &RunStatistics, exact: &ExactValues, tol: &Tolerances) -> Vec<Comparison> {
    let row = |quantity, estimate: f64, exact: f64, tolerance: f64| {
        let difference = (estimate - exact).abs();
        Comparison { quantity, estimate, exact, difference, tolerance, pass: difference <= tolerance }
    };
    vec![
        row("E[mp]", report.mean_payoff, exact.mean_payoff, tol.mean_payoff),
        row("Var[mp]", report.variance, exact.variance, tol.variance),
        row("E[lv]", report.local_variance, exact.local_variance, tol.local_variance),
        row("E[hv]", report.hybrid_variance, exact.hybrid_variance, tol.hybrid_variance),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{commit_strategy, loop_commit_strategy, m_glob, m_uni, md_strategy};
    use crate::numerics::markov::evaluate_strategy;

    #[test]
    fn same_seed_same_bits() {
        let mdp = m_glob();
        let s = loop_commit_strategy(&mdp);
        let cfg = SimConfig::new(200, 300, 7);
        assert_eq!(simulate(&mdp, &s, 0, &cfg), simulate(&mdp, &s, 0, &cfg));
        let other = simulate(&mdp, &s, 0, &SimConfig::new(200, 300, 8));
        assert_ne!(simulate(&mdp, &s, 0, &cfg).mean_payoff, other.mean_payoff);
    }

    #[test]
    fn deterministic_loop_has_zero_spread() {
        let mdp = m_uni();
        let s = md_strategy(&mdp, &["b", "c"]).to_memoryless().into_stochastic_update();
        let stats = simulate(&mdp, &s, 0, &SimConfig::new(50, 100, 1));
        assert_eq!(stats.mean_payoff, 2.0);
        assert_eq!(stats.variance, 0.0);
        assert_eq!(stats.local_variance, 0.0);
    }

    #[test]
    fn commit_strategy_matches_exact_values() {
        let mdp = m_uni();
        let s = commit_strategy(&mdp);
        let exact = ExactValues::from(&evaluate_strategy(&mdp, &s, 0).unwrap());
        let stats = simulate(&mdp, &s, 0, &SimConfig::new(4000, 400, 3));
        for c in compare_exact(&stats, &exact, &Tolerances::uniform(0.03)) {
            assert!(c.pass, "{c:?}");
        }
    }

    #[test]
    fn comparison_flags_large_errors() {
        let mdp = m_uni();
        let s = commit_strategy(&mdp);
        let stats = simulate(&mdp, &s, 0, &SimConfig::new(500, 200, 3));
        let mut exact = ExactValues { mean_payoff: 1.5, variance: 0.25, local_variance: 0.5, hybrid_variance: 0.75 };
        exact.variance += 0.2;
        let res = compare_exact(&stats, &exact, &Tolerances::uniform(0.1));
        assert!(!res[1].pass);
        assert_eq!(res[1].quantity, "Var[mp]");
        let tol = Tolerances::from_stderr(&stats, 3.0, 0.01);
        assert!(tol.mean_payoff >= 0.01);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let v: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 500500.0);
    }
}
