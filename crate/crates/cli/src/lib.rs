//! `mdpstab` command line.
//!
//! Exit codes: 0 success, 1 negative answer, 2 usage error, 3 model error.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use mdpstab::global::{CheckMethod, GlobalAnalyzer};
use mdpstab::graph::mec_decomposition;
use mdpstab::hybrid::{check_relation, default_eps, HybridAnalyzer};
use mdpstab::local::{LocalAnalyzer, LocalAnswer};
use mdpstab::model::{Mdp, StochasticUpdateStrategy};
use mdpstab::numerics::markov::evaluate_strategy;
use mdpstab::numerics::payoff_intervals;
use mdpstab::numerics::rational::{format_rational, parse_rational, to_f64, Rat};
use mdpstab::pareto::{pareto, witness_file_name, CellAnswer, ParetoOptions};
use mdpstab::sim::{compare_exact, simulate_with_reference, ExactValues, SimConfig, Tolerances};
use mdpstab::zerovar::{zero_var, ZeroVarAnswer};
use mdpstab::VarianceKind;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_MODEL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "mdpstab", version, about = "Mean payoff versus variance in finite MDPs")]
struct Cli {
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List maximal end components and their mean-payoff intervals.
    Mec(MecArgs),
    /// Decide whether a point (u, v) is achievable.
    Check(QueryArgs),
    /// Least expectation achievable with zero variance.
    ZeroVar(ZeroVarArgs),
    /// Approximate the Pareto curve on an eps-grid.
    Pareto(ParetoArgs),
    /// Like `check`, but write the witness strategy to a file.
    Synthesize(SynthesizeArgs),
    /// Monte Carlo statistics of a strategy.
    Simulate(SimulateArgs),
    /// Check hybrid = global + local for a strategy.
    Relation(RelationArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Global,
    Local,
    Hybrid,
}

impl From<KindArg> for VarianceKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Global => VarianceKind::Global,
            KindArg::Local => VarianceKind::Local,
            KindArg::Hybrid => VarianceKind::Hybrid,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Hull,
    Sweep,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// MDP description (JSON).
    #[arg(long, value_name = "FILE")]
    mdp: PathBuf,
    /// Start state; defaults to the model's initial state.
    #[arg(long, value_name = "STATE")]
    from: Option<String>,
}

#[derive(Debug, Args)]
struct MecArgs {
    #[arg(long, value_name = "FILE")]
    mdp: PathBuf,
}

#[derive(Debug, Args)]
struct QueryArgs {
    #[arg(value_enum)]
    kind: KindArg,
    #[command(flatten)]
    model: ModelArgs,
    /// Target point as `u,v`.
    #[arg(long, value_name = "U,V", value_parser = parse_point)]
    point: (Rat, Rat),
    /// Approximation slack (global and hybrid).
    #[arg(long, value_parser = parse_rat)]
    eps: Option<Rat>,
    /// Maximum number of strategy pairs for local queries.
    #[arg(long, value_name = "K")]
    pair_budget: Option<usize>,
    #[arg(long, value_enum, default_value = "hull")]
    method: MethodArg,
}

#[derive(Debug, Args)]
struct SynthesizeArgs {
    #[command(flatten)]
    query: QueryArgs,
    /// Where to write the strategy.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ZeroVarArgs {
    #[arg(value_enum)]
    kind: KindArg,
    #[arg(long, value_name = "FILE")]
    mdp: PathBuf,
    #[arg(long, value_name = "STATE", conflicts_with = "all_states")]
    from: Option<String>,
    /// One row per state.
    #[arg(long)]
    all_states: bool,
    /// Write the witness strategy (single state only).
    #[arg(long, value_name = "FILE", conflicts_with = "all_states")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ParetoArgs {
    #[arg(value_enum)]
    kind: KindArg,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_parser = parse_rat)]
    eps: Rat,
    /// Write the grid as CSV.
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
    /// Write the grid as JSON.
    #[arg(long, value_name = "FILE")]
    json_out: Option<PathBuf>,
    /// Directory for witness strategies; defaults to the CSV's directory.
    #[arg(long, value_name = "DIR")]
    witness_dir: Option<PathBuf>,
    #[arg(long, value_name = "K")]
    pair_budget: Option<usize>,
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct SimArgs {
    #[arg(long, default_value_t = 1000)]
    runs: usize,
    #[arg(long, default_value_t = 1000)]
    horizon: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Steps discarded per run; defaults to horizon/10.
    #[arg(long)]
    burn_in: Option<usize>,
}

impl SimArgs {
    fn config(&self) -> Result<SimConfig, Failure> {
        if self.runs == 0 || self.horizon == 0 {
            return Err(Failure::Usage("--runs and --horizon must be positive".into()));
        }
        if self.burn_in.is_some_and(|b| b >= self.horizon) {
            return Err(Failure::Usage("--burn-in must be smaller than --horizon".into()));
        }
        let mut cfg = SimConfig::new(self.runs, self.horizon, self.seed);
        cfg.burn_in = self.burn_in;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_name = "FILE")]
    strategy: PathBuf,
    #[command(flatten)]
    sim: SimArgs,
    /// Also compute exact values and compare.
    #[arg(long)]
    exact: bool,
}

#[derive(Debug, Args)]
struct RelationArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_name = "FILE")]
    strategy: PathBuf,
    /// Add a Monte Carlo cross-check.
    #[arg(long)]
    simulate: bool,
    #[command(flatten)]
    sim: SimArgs,
}

fn parse_rat(s: &str) -> Result<Rat, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

fn parse_point(s: &str) -> Result<(Rat, Rat), String> {
    let (u, v) = s.split_once(',').ok_or_else(|| format!("expected `u,v`, got `{s}`"))?;
    Ok((parse_rat(u)?, parse_rat(v)?))
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Model(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Model(_) => EXIT_MODEL,
        }
    }
}

impl From<mdpstab::Error> for Failure {
    fn from(e: mdpstab::Error) -> Self {
        match e {
            mdpstab::Error::InvalidEps | mdpstab::Error::ZOutsideInterval { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Model(e.to_string()),
        }
    }
}

impl From<mdpstab::model::ModelError> for Failure {
    fn from(e: mdpstab::model::ModelError) -> Self {
        Failure::Model(e.to_string())
    }
}

impl From<mdpstab::numerics::NumericsError> for Failure {
    fn from(e: mdpstab::numerics::NumericsError) -> Self {
        Failure::Model(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Model(e.to_string())
    }
}

/// Runs the command line `args` (including the program name) and returns
/// the exit code.
pub fn run_cli<S: AsRef<str>>(args: &[S], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args.iter().map(|a| a.as_ref())) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    let json = cli.json;
    let result = match cli.command {
        Command::Mec(a) => cmd_mec(&a, json, out),
        Command::Check(a) => cmd_check(&a, None, json, out),
        Command::Synthesize(a) => cmd_check(&a.query, Some(&a.out), json, out),
        Command::ZeroVar(a) => cmd_zero_var(&a, json, out),
        Command::Pareto(a) => cmd_pareto(&a, json, out),
        Command::Simulate(a) => cmd_simulate(&a, out),
        Command::Relation(a) => cmd_relation(&a, json, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let (Failure::Usage(msg) | Failure::Model(msg)) = &f;
            let _ = writeln!(err, "error: {msg}");
            f.code()
        }
    }
}

fn load_mdp(path: &Path) -> Result<Mdp, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Model(format!("{}: {e}", path.display())))?;
    Ok(Mdp::from_json_str(&text)?)
}

fn load(model: &ModelArgs) -> Result<(Mdp, usize), Failure> {
    let mdp = load_mdp(&model.mdp)?;
    let start = match &model.from {
        Some(name) => mdp.require_state(name)?,
        None => mdp.initial(),
    };
    Ok((mdp, start))
}

fn load_strategy(mdp: &Mdp, path: &Path) -> Result<StochasticUpdateStrategy, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Model(format!("{}: {e}", path.display())))?;
    Ok(StochasticUpdateStrategy::from_json_str(mdp, &text)?)
}

fn print_json(out: &mut dyn Write, value: &Value) -> Result<(), Failure> {
    writeln!(out, "{}", serde_json::to_string_pretty(value).expect("JSON value serializes"))?;
    Ok(())
}

fn rat(value: &Rat) -> Value {
    Value::String(format_rational(value))
}

fn cmd_mec(a: &MecArgs, json: bool, out: &mut dyn Write) -> Result<i32, Failure> {
    let mdp = load_mdp(&a.mdp)?;
    let mecs = mec_decomposition(&mdp);
    let bounds = payoff_intervals(&mdp, &mecs);
    if json {
        let rows: Vec<Value> = mecs
            .iter()
            .zip(&bounds)
            .map(|(m, b)| {
                json!({
                    "states": m.states.iter().map(|&s| mdp.state_name(s)).collect::<Vec<_>>(),
                    "actions": m.actions.iter().map(|&x| mdp.action(x).id.as_str()).collect::<Vec<_>>(),
                    "alpha": rat(&b.alpha),
                    "beta": rat(&b.beta),
                })
            })
            .collect();
        print_json(out, &json!({ "mecs": rows }))?;
    } else {
        for (i, (m, b)) in mecs.iter().zip(&bounds).enumerate() {
            writeln!(out, "MEC {i}: {} payoff [{}, {}]", m.describe(&mdp), format_rational(&b.alpha), format_rational(&b.beta))?;
        }
    }
    Ok(EXIT_OK)
}

/// Outcome of one check, independent of the variance kind.
struct Checked {
    answer: &'static str,
    values: Option<(Rat, Rat)>,
    extra: Value,
    strategy: Option<StochasticUpdateStrategy>,
}

fn run_check(mdp: &Mdp, start: usize, q: &QueryArgs) -> Result<Checked, Failure> {
    let (u, v) = &q.point;
    let method = match q.method {
        MethodArg::Hull => CheckMethod::Hull,
        MethodArg::Sweep => CheckMethod::MeanSweep,
    };
    let checked = match VarianceKind::from(q.kind) {
        VarianceKind::Global => {
            let eps = q.eps.clone().unwrap_or_else(default_eps);
            match GlobalAnalyzer::new(mdp, start).check(u, v, &eps, method)? {
                mdpstab::global::GlobalAnswer::Yes(w) => Checked {
                    answer: "Yes",
                    values: Some((w.expectation.clone(), w.variance.clone())),
                    extra: json!({ "z_bar": rat(&w.z_bar), "x_mec": w.x_mec.iter().map(rat).collect::<Vec<_>>() }),
                    strategy: Some(w.strategy),
                },
                mdpstab::global::GlobalAnswer::No => {
                    Checked { answer: "No", values: None, extra: json!({ "z_bar": null }), strategy: None }
                }
            }
        }
        VarianceKind::Hybrid => {
            let eps = q.eps.clone().unwrap_or_else(default_eps);
            match HybridAnalyzer::new(mdp, start).check(u, v, &eps, method)? {
                mdpstab::hybrid::HybridAnswer::Yes(w) => Checked {
                    answer: "Yes",
                    values: Some((w.expectation.clone(), w.hybrid_variance.clone())),
                    extra: json!({ "mean_pivot": rat(&w.mean_pivot) }),
                    strategy: Some(w.strategy),
                },
                mdpstab::hybrid::HybridAnswer::No => Checked { answer: "No", values: None, extra: json!({}), strategy: None },
            }
        }
        VarianceKind::Local => match LocalAnalyzer::new(mdp, start, q.pair_budget)?.check(u, v)? {
            LocalAnswer::Yes(w) => Checked {
                answer: "Yes",
                values: Some((w.expectation.clone(), w.local_variance.clone())),
                extra: json!({
                    "pair_index": w.pair_index,
                    "pi": w.pi.describe(mdp),
                    "pi_prime": w.pi_prime.describe(mdp),
                }),
                strategy: Some(w.strategy),
            },
            LocalAnswer::No => Checked { answer: "No", values: None, extra: json!({}), strategy: None },
            LocalAnswer::BudgetExceeded { checked, total } => Checked {
                answer: "Unknown",
                values: None,
                extra: json!({ "pairs_checked": checked, "pairs_total": total.to_string() }),
                strategy: None,
            },
        },
    };
    Ok(checked)
}

fn cmd_check(q: &QueryArgs, write_to: Option<&Path>, json: bool, out: &mut dyn Write) -> Result<i32, Failure> {
    let (mdp, start) = load(&q.model)?;
    let kind = VarianceKind::from(q.kind);
    let c = run_check(&mdp, start, q)?;
    if let (Some(path), Some(s)) = (write_to, &c.strategy) {
        std::fs::write(path, s.to_json_string(&mdp))?;
    }
    if json {
        let mut v = json!({
            "kind": kind,
            "from": mdp.state_name(start),
            "u": rat(&q.point.0),
            "v": rat(&q.point.1),
            "answer": c.answer,
        });
        if let Some(eps) = q.eps.as_ref().filter(|_| kind != VarianceKind::Local) {
            v["eps"] = rat(eps);
        }
        if let Value::Object(extra) = c.extra {
            v.as_object_mut().expect("object").extend(extra);
        }
        if let (Some((e, var)), Some(s)) = (&c.values, &c.strategy) {
            v["witness"] = json!({
                "expectation": rat(e),
                "variance": rat(var),
                "memory": s.memory.len(),
                "strategy": s.to_file(&mdp),
            });
        }
        print_json(out, &v)?;
    } else {
        writeln!(out, "{}", c.answer)?;
        if let (Some((e, var)), Some(s)) = (&c.values, &c.strategy) {
            writeln!(out, "expectation: {}", format_rational(e))?;
            writeln!(out, "{kind} variance: {}", format_rational(var))?;
            writeln!(out, "memory: {}", s.memory.len())?;
        }
        if let Value::Object(extra) = &c.extra {
            for (k, val) in extra {
                match val {
                    Value::Null => {}
                    Value::String(s) => writeln!(out, "{k}: {s}")?,
                    other => writeln!(out, "{k}: {other}")?,
                }
            }
        }
        if let Some(path) = write_to.filter(|_| c.strategy.is_some()) {
            writeln!(out, "strategy written to {}", path.display())?;
        }
    }
    Ok(if c.answer == "Yes" { EXIT_OK } else { EXIT_NO })
}

fn cmd_zero_var(a: &ZeroVarArgs, json: bool, out: &mut dyn Write) -> Result<i32, Failure> {
    let mdp = load_mdp(&a.mdp)?;
    let kind = VarianceKind::from(a.kind);
    let states: Vec<usize> = if a.all_states {
        (0..mdp.num_states()).collect()
    } else {
        vec![match &a.from {
            Some(name) => mdp.require_state(name)?,
            None => mdp.initial(),
        }]
    };
    let answers: Vec<ZeroVarAnswer> = states.iter().map(|&s| zero_var(&mdp, s, kind)).collect::<Result<_, _>>()?;
    if let (Some(path), Some(w)) = (&a.out, answers[0].witness.as_ref()) {
        std::fs::write(path, w.to_json_string(&mdp))?;
    }
    if json {
        let rows: Vec<Value> = states
            .iter()
            .zip(&answers)
            .map(|(&s, ans)| json!({ "state": mdp.state_name(s), "value": ans.value.as_ref().map(rat) }))
            .collect();
        print_json(out, &json!({ "kind": kind, "results": rows }))?;
    } else if a.all_states {
        let width = states.iter().map(|&s| mdp.state_name(s).len()).max().unwrap_or(0);
        for (&s, ans) in states.iter().zip(&answers) {
            writeln!(out, "{:<width$}  {}", mdp.state_name(s), ans.describe())?;
        }
    } else {
        writeln!(out, "{}", answers[0].describe())?;
    }
    let negative = !a.all_states && answers[0].value.is_none();
    Ok(if negative { EXIT_NO } else { EXIT_OK })
}

fn cmd_pareto(a: &ParetoArgs, json: bool, out: &mut dyn Write) -> Result<i32, Failure> {
    let (mdp, start) = load(&a.model)?;
    let kind = VarianceKind::from(a.kind);
    let opts = ParetoOptions { pair_budget: a.pair_budget, threads: a.threads };
    let grid = pareto(&mdp, start, kind, &a.eps, &opts)?;

    if let Some(path) = &a.csv {
        std::fs::write(path, grid.to_csv())?;
    }
    if let Some(path) = &a.json_out {
        std::fs::write(path, grid.to_json())?;
    }
    let witness_dir = a.witness_dir.clone().or_else(|| {
        a.csv.as_ref().map(|p| p.parent().map(Path::to_path_buf).unwrap_or_default())
    });
    if let Some(dir) = &witness_dir {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
        for (id, w) in grid.witnesses.iter().enumerate() {
            std::fs::write(dir.join(witness_file_name(id)), w.to_json_string(&mdp))?;
        }
    }

    if json {
        writeln!(out, "{}", grid.to_json())?;
    } else {
        let count = |x: CellAnswer| grid.cells.iter().filter(|c| c.answer == x).count();
        writeln!(
            out,
            "{kind} grid, eps {}: {} cells, {} yes, {} no, {} unknown, {} witnesses",
            format_rational(&grid.eps),
            grid.cells.len(),
            count(CellAnswer::Yes),
            count(CellAnswer::No),
            count(CellAnswer::Unknown),
            grid.witnesses.len()
        )?;
        writeln!(out, "staircase:")?;
        for p in &grid.staircase {
            writeln!(out, "  ({}, {})", format_rational(&p.u), format_rational(&p.v))?;
        }
    }
    Ok(EXIT_OK)
}

fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let (mdp, start) = load(&a.model)?;
    let strategy = load_strategy(&mdp, &a.strategy)?;
    let cfg = a.sim.config()?;
    if !a.exact {
        let stats = simulate_with_reference(&mdp, &strategy, start, &cfg, None);
        print_json(out, &serde_json::to_value(&stats).expect("statistics serialize"))?;
        return Ok(EXIT_OK);
    }
    let analysis = evaluate_strategy(&mdp, &strategy, start)?;
    let stats = simulate_with_reference(&mdp, &strategy, start, &cfg, Some(to_f64(&analysis.expectation)));
    let exact = ExactValues::from(&analysis);
    let rows = compare_exact(&stats, &exact, &Tolerances::from_stderr(&stats, 3.0, 0.01));
    let pass = rows.iter().all(|r| r.pass);
    print_json(
        out,
        &json!({
            "statistics": stats,
            "exact": {
                "mean_payoff": rat(&analysis.expectation),
                "variance": rat(&analysis.variance),
                "local_variance": rat(&analysis.local_variance),
                "hybrid_variance": rat(&analysis.hybrid_variance),
            },
            "comparison": rows,
            "pass": pass,
        }),
    )?;
    Ok(if pass { EXIT_OK } else { EXIT_NO })
}

fn cmd_relation(a: &RelationArgs, json: bool, out: &mut dyn Write) -> Result<i32, Failure> {
    let (mdp, start) = load(&a.model)?;
    let strategy = load_strategy(&mdp, &a.strategy)?;
    let cfg = if a.simulate { Some(a.sim.config()?) } else { None };
    let report = check_relation(&mdp, &strategy, start, cfg.as_ref())?;
    let agree = report.simulated.as_ref().is_none_or(|s| s.agree);
    if json {
        print_json(out, &serde_json::to_value(&report).expect("report serializes"))?;
    } else {
        writeln!(out, "E[mp]   = {}", format_rational(&report.expectation))?;
        writeln!(out, "Var[mp] = {}", format_rational(&report.variance))?;
        writeln!(out, "E[lv]   = {}", format_rational(&report.local_variance))?;
        writeln!(out, "E[hv]   = {}", format_rational(&report.hybrid_variance))?;
        writeln!(out, "E[hv] = Var[mp] + E[lv]: {}", if report.exact_holds { "holds" } else { "FAILS" })?;
        if let Some(s) = &report.simulated {
            writeln!(
                out,
                "simulated: E[hv] {:.4}, Var[mp] {:.4}, E[lv] {:.4} (tolerance {:.4}): {}",
                s.hybrid_variance,
                s.variance,
                s.local_variance,
                s.tolerance,
                if s.agree { "agrees" } else { "disagrees" }
            )?;
        }
    }
    Ok(if report.exact_holds && agree { EXIT_OK } else { EXIT_NO })
}
