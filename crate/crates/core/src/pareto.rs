//! Grid approximation of the Pareto curve of (expectation, variance).
//!
//! Every point `(u, v)` of an `eps`-grid over `[−R, R] × [0, R²]` is
//! decided by the kind-specific checker; `R` is the largest absolute reward.
//! Yes cells carry a witness whose exact values are compared with the cell.

use std::collections::BTreeMap;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::global::{GlobalAnalyzer, GlobalTable};
use crate::hybrid::HybridAnalyzer;
use crate::local::LocalAnalyzer;
use crate::model::{Mdp, StochasticUpdateStrategy};
use crate::numerics::hull::HullChoice;
use crate::numerics::rational::{format_rational, parse_rational, serde_rat, Rat};
use crate::{Error, Result, VarianceKind};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "MDPSTAB_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellAnswer {
    Yes,
    No,
    /// The local checker ran out of strategy pairs.
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoCell {
    #[serde(with = "serde_rat")]
    pub u: Rat,
    #[serde(with = "serde_rat")]
    pub v: Rat,
    pub answer: CellAnswer,
    /// Index into the witness list for Yes cells.
    pub witness: Option<usize>,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StairPoint {
    #[serde(with = "serde_rat")]
    pub u: Rat,
    #[serde(with = "serde_rat")]
    pub v: Rat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoGridResult {
    pub kind: VarianceKind,
    #[serde(with = "serde_rat")]
    pub eps: Rat,
    /// Row-major: `u` outer, `v` inner, both ascending.
    pub cells: Vec<ParetoCell>,
    /// Minimal Yes points, sorted by `u`.
    pub staircase: Vec<StairPoint>,
    #[serde(skip)]
    pub witnesses: Vec<StochasticUpdateStrategy>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ParetoOptions {
    pub pair_budget: Option<usize>,
    /// Worker cap; `None` reads the environment variable, then uses all cores.
    pub threads: Option<usize>,
}

/// Grid coordinates: `u` from `−R` to `R`, `v` from 0 to `R²`, step `eps`.
pub fn grid_axes(mdp: &Mdp, eps: &Rat) -> Result<(Vec<Rat>, Vec<Rat>)> {
    if !eps.is_positive() {
        return Err(Error::InvalidEps);
    }
    let r = mdp.max_abs_reward();
    let steps = |lo: Rat, hi: Rat| -> Vec<Rat> {
        let mut out = Vec::new();
        let mut x = lo;
        while x <= hi {
            out.push(x.clone());
            x += eps;
        }
        out
    };
    Ok((steps(-r.clone(), r.clone()), steps(Rat::zero(), &r * &r)))
}

/// Keeps the Yes points not dominated by another Yes point.
pub fn staircase(cells: &[ParetoCell]) -> Vec<StairPoint> {
    let mut yes: Vec<StairPoint> = cells
        .iter()
        .filter(|c| c.answer == CellAnswer::Yes)
        .map(|c| StairPoint { u: c.u.clone(), v: c.v.clone() })
        .collect();
    yes.sort();
    let mut out: Vec<StairPoint> = Vec::new();
    for p in yes {
        // sorted by (u, v): p is dominated iff some kept point has v ≤ p.v
        if out.iter().all(|q| q.v > p.v) {
            out.push(p);
        }
    }
    out
}

enum Engine<'a> {
    Global(GlobalAnalyzer<'a>, GlobalTable),
    Local(LocalAnalyzer<'a>),
    Hybrid(HybridAnalyzer<'a>),
}

type Key = (usize, usize, usize, Rat);

enum Decision {
    Yes(Key, usize, HullChoice),
    No,
    Unknown,
}

impl Engine<'_> {
    fn decide(&self, u: &Rat, v: &Rat) -> Decision {
        let found = match self {
            Engine::Global(_, table) => table.decide(u, v),
            Engine::Local(an) => an.decide(u, v),
            Engine::Hybrid(an) => an.decide(u, v).map(|c| (0, c)),
        };
        match found {
            Some((i, c)) => Decision::Yes((i, c.left, c.right, c.lambda.clone()), i, c),
            None => match self {
                Engine::Local(an) if !an.is_complete() => Decision::Unknown,
                _ => Decision::No,
            },
        }
    }

    /// Witness strategy with its exact expectation and variance.
    fn witness(&self, index: usize, choice: &HullChoice) -> Result<(StochasticUpdateStrategy, Rat, Rat)> {
        Ok(match self {
            Engine::Global(an, table) => {
                let w = an.witness_from_table(table, index, choice)?;
                (w.strategy, w.expectation, w.variance)
            }
            Engine::Local(an) => {
                let w = an.witness_from_choice(index, choice)?;
                (w.strategy, w.expectation, w.local_variance)
            }
            Engine::Hybrid(an) => {
                let w = an.witness_from_choice(choice)?;
                (w.strategy, w.expectation, w.hybrid_variance)
            }
        })
    }
}

/// Wall-clock stopwatch; reads zero where the platform has no clock.
#[derive(Clone, Copy)]
struct Stopwatch(#[cfg(not(target_arch = "wasm32"))] std::time::Instant);

impl Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    fn start() -> Self {
        Stopwatch(std::time::Instant::now())
    }

    #[cfg(target_arch = "wasm32")]
    fn start() -> Self {
        Stopwatch()
    }

    #[cfg(not(target_arch = "wasm32"))]
    fn millis(self) -> f64 {
        self.0.elapsed().as_micros() as f64 / 1000.0
    }

    #[cfg(target_arch = "wasm32")]
    fn millis(self) -> f64 {
        0.0
    }
}

fn thread_count(opts: &ParetoOptions) -> Option<usize> {
    opts.threads.or_else(|| std::env::var(THREADS_ENV).ok()?.trim().parse().ok()).filter(|&n| n > 0)
}

#[cfg(feature = "parallel")]
fn par_map<T: Sync, R: Send>(items: &[T], threads: Option<usize>, f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    let run = || items.par_iter().map(&f).collect();
    match threads.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(run),
        None => run(),
    }
}

#[cfg(not(feature = "parallel"))]
fn par_map<T: Sync, R: Send>(items: &[T], _threads: Option<usize>, f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    items.iter().map(f).collect()
}

pub fn pareto(mdp: &Mdp, start: usize, kind: VarianceKind, eps: &Rat, opts: &ParetoOptions) -> Result<ParetoGridResult> {
    let (us, vs) = grid_axes(mdp, eps)?;
    let threads = thread_count(opts);
    let engine = match kind {
        VarianceKind::Global => {
            let an = GlobalAnalyzer::new(mdp, start);
            let table = an.table(eps)?;
            Engine::Global(an, table)
        }
        VarianceKind::Local => Engine::Local(LocalAnalyzer::new(mdp, start, opts.pair_budget)?),
        VarianceKind::Hybrid => Engine::Hybrid(HybridAnalyzer::new(mdp, start)),
    };

    let points: Vec<(Rat, Rat)> = us.iter().flat_map(|u| vs.iter().map(move |v| (u.clone(), v.clone()))).collect();
    let decided: Vec<(Decision, f64)> = par_map(&points, threads, |(u, v)| {
        let t = Stopwatch::start();
        let d = engine.decide(u, v);
        (d, t.millis())
    });

    // distinct witnesses, numbered in grid order
    let mut ids: BTreeMap<Key, usize> = BTreeMap::new();
    let mut jobs: Vec<(usize, HullChoice)> = Vec::new();
    for (d, _) in &decided {
        if let Decision::Yes(key, i, c) = d {
            if !ids.contains_key(key) {
                ids.insert(key.clone(), jobs.len());
                jobs.push((*i, c.clone()));
            }
        }
    }
    let built: Vec<(Result<(StochasticUpdateStrategy, Rat, Rat)>, f64)> = par_map(&jobs, threads, |(i, c)| {
        let t = Stopwatch::start();
        let w = engine.witness(*i, c);
        (w, t.millis())
    });
    let mut witnesses = Vec::with_capacity(built.len());
    let mut values = Vec::with_capacity(built.len());
    let mut build_ms = Vec::with_capacity(built.len());
    for (w, ms) in built {
        let (s, e, var) = w?;
        witnesses.push(s);
        values.push((e, var));
        build_ms.push(ms);
    }

    let mut charged = vec![false; witnesses.len()];
    let mut cells = Vec::with_capacity(points.len());
    for ((u, v), (d, ms)) in points.into_iter().zip(decided) {
        let (answer, witness, elapsed_ms) = match d {
            Decision::Yes(key, _, _) => {
                let id = ids[&key];
                let (e, var) = &values[id];
                if *e > u || *var > v {
                    return Err(Error::InfeasibleWitness(format!(
                        "{kind} witness realizes ({}, {}) at grid point ({}, {})",
                        format_rational(e),
                        format_rational(var),
                        format_rational(&u),
                        format_rational(&v)
                    )));
                }
                let extra = if charged[id] { 0.0 } else { build_ms[id] };
                charged[id] = true;
                (CellAnswer::Yes, Some(id), ms + extra)
            }
            Decision::No => (CellAnswer::No, None, ms),
            Decision::Unknown => (CellAnswer::Unknown, None, ms),
        };
        cells.push(ParetoCell { u, v, answer, witness, elapsed_ms });
    }
    let staircase = staircase(&cells);
    Ok(ParetoGridResult { kind, eps: eps.clone(), cells, staircase, witnesses })
}

/// One CSV row.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct CsvRow {
    kind: VarianceKind,
    u: String,
    v: String,
    answer: CellAnswer,
    witness_file: String,
    elapsed_ms: String,
}

/// File name used for witness `id` in CSV output.
pub fn witness_file_name(id: usize) -> String {
    format!("witness_{id}.json")
}

fn witness_id(file: &str) -> Option<usize> {
    file.strip_prefix("witness_")?.strip_suffix(".json")?.parse().ok()
}

#[derive(Debug, thiserror::Error)]
pub enum GridFormatError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("bad number `{0}`")]
    Number(String),
    #[error("rows mix several variance kinds")]
    MixedKinds,
}

impl ParetoGridResult {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for c in &self.cells {
            w.serialize(CsvRow {
                kind: self.kind,
                u: format_rational(&c.u),
                v: format_rational(&c.v),
                answer: c.answer,
                witness_file: c.witness.map(witness_file_name).unwrap_or_default(),
                elapsed_ms: c.elapsed_ms.to_string(),
            })
            .expect("in-memory CSV write");
        }
        String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV is UTF-8")
    }

    /// Reads cells back; `eps` is not part of the CSV columns.
    pub fn from_csv(text: &str, kind: VarianceKind, eps: Rat) -> Result<Self, GridFormatError> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let mut cells = Vec::new();
        for row in r.deserialize() {
            let row: CsvRow = row?;
            if row.kind != kind {
                return Err(GridFormatError::MixedKinds);
            }
            let num = |s: &str| parse_rational(s).map_err(|_| GridFormatError::Number(s.to_string()));
            cells.push(ParetoCell {
                u: num(&row.u)?,
                v: num(&row.v)?,
                answer: row.answer,
                witness: witness_id(&row.witness_file),
                elapsed_ms: row.elapsed_ms.parse().map_err(|_| GridFormatError::Number(row.elapsed_ms.clone()))?,
            });
        }
        let staircase = staircase(&cells);
        Ok(ParetoGridResult { kind, eps, cells, staircase, witnesses: Vec::new() })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("grid serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, GridFormatError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Staircase point within `(du, dv)` of `(u, v)`, if any.
    pub fn near(&self, u: &Rat, v: &Rat, du: &Rat, dv: &Rat) -> Option<&StairPoint> {
        self.staircase.iter().find(|p| (&p.u - u).abs() <= *du && (&p.v - v).abs() <= *dv)
    }
}
