//! Command-line front end.
//!
//! Exit codes: 0 on success or a passing check, 1 when a model fails
//! validation or a check fails, 2 on bad usage.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use posg_core::average::{acoe_residuals_with, default_schedule, AverageError};
use posg_core::coupling::{
    check_value_difference_bound, validate_lyapunov, ObservationSplit, SplitChainConfig, DEFAULT_HORIZON_CAP,
};
use posg_core::model::{self, canonical};
use posg_core::rollout::{default_adversary_pool, payoff_equivalence_test, saddle_test};
use posg_core::shapley::{extract_strategies_with, value_iterate_with, BeliefDynamics};
use posg_core::stats::{kolmogorov_survival, ks_statistic_discrete};
use posg_core::{run_vanishing_discount, Belief, VanishingDiscountRun, GameModel, MixedAction, Side, SimplexGrid, Strategy};

use crate::{io, report, table};

#[derive(Parser, Debug)]
#[command(name = "posg", version, about = "Solve and check finite zero-sum partially observable stochastic games")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check a model file and print the validation report.
    Validate(ModelArg),
    /// Discounted value and stationary strategies on the belief grid.
    SolveDiscounted(SolveDiscounted),
    /// Average-payoff value by vanishing discount.
    SolveAverage(SolveAverage),
    /// Play two strategies and compare hidden-state and belief payoffs.
    Simulate(Simulate),
    /// Challenge a strategy table with a pool of adversaries.
    Saddle(Saddle),
    /// Coupling time, value-gap bound and Lyapunov certificate checks.
    Couple(Couple),
}

#[derive(Args, Debug)]
pub struct ModelArg {
    /// Model file, or the name of a built-in model (CANON2, SEP2, FULLOBS3,
    /// UNCTRL2, PATROL2, POINT1).
    #[arg(long)]
    pub model: String,
}

#[derive(Args, Debug)]
pub struct GridArgs {
    /// Grid resolution: beliefs are multiples of 1/m.
    #[arg(long, default_value_t = 32)]
    pub m: u32,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iter: usize,
}

#[derive(Args, Debug)]
pub struct SolveDiscounted {
    #[command(flatten)]
    pub model: ModelArg,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = 0.9)]
    pub alpha: f64,
    /// Output table; stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SolveAverage {
    #[command(flatten)]
    pub model: ModelArg,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Increasing discounts in (0, 1); default 1 - 2^-k for k = 1..7.
    #[arg(long, value_delimiter = ',')]
    pub alphas: Vec<f64>,
    /// Reference belief; defaults to the model's initial belief.
    #[arg(long, value_delimiter = ',')]
    pub psi_star: Vec<f64>,
    /// Add a wall-time column (makes the output run-dependent).
    #[arg(long)]
    pub timing: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Copy, Debug)]
pub struct RolloutArgs {
    #[arg(long, default_value_t = 200)]
    pub episodes: usize,
    #[arg(long, default_value_t = 10_000)]
    pub horizon: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct Simulate {
    #[command(flatten)]
    pub model: ModelArg,
    /// Player 1 strategy: uniform, pure:K, mixed:P0,P1,.. or table:PATH.
    #[arg(long, default_value = "uniform")]
    pub p1: String,
    /// Player 2 strategy, same syntax.
    #[arg(long, default_value = "uniform")]
    pub p2: String,
    #[command(flatten)]
    pub rollout: RolloutArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct Saddle {
    #[command(flatten)]
    pub model: ModelArg,
    /// Table written by solve-discounted.
    #[arg(long)]
    pub table: PathBuf,
    /// Claimed average value.
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: f64,
    /// Allowance added to three standard errors.
    #[arg(long, default_value_t = 0.05)]
    pub budget: f64,
    #[command(flatten)]
    pub rollout: RolloutArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SplitArg {
    Auto,
    Product,
    Conditional,
}

#[derive(Args, Debug)]
pub struct Couple {
    #[command(flatten)]
    pub model: ModelArg,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = 0.9)]
    pub alpha: f64,
    /// Small set K; defaults to every state.
    #[arg(long, value_delimiter = ',')]
    pub small_set: Vec<usize>,
    /// First copy's initial belief; defaults to the first vertex.
    #[arg(long, value_delimiter = ',')]
    pub psi_hat: Vec<f64>,
    /// Second copy's initial belief; defaults to the last vertex.
    #[arg(long, value_delimiter = ',')]
    pub psi_tilde: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = DEFAULT_HORIZON_CAP)]
    pub horizon_cap: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = SplitArg::Auto)]
    pub split: SplitArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Bad parameter values; reported with exit code 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// The fully resolved parameters of one run, echoed into every output file.
#[derive(Debug, Default)]
pub struct RunConfig {
    pub command: String,
    pub model: String,
    pub m: Option<u32>,
    pub alphas: Vec<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub seed: Option<u64>,
    pub episodes: Option<usize>,
    pub horizon: Option<usize>,
    pub output: Option<PathBuf>,
    pub small_set: Vec<usize>,
    pub psi_star: Vec<f64>,
    pub extra: Vec<(String, String)>,
}

fn list<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
}

impl RunConfig {
    fn new(command: &str, model: &str) -> RunConfig {
        RunConfig { command: command.into(), model: model.into(), ..RunConfig::default() }
    }

    fn extra(&mut self, key: &str, value: impl ToString) {
        self.extra.push((key.into(), value.to_string()));
    }

    /// `key=value` pairs on one line. The thread count is left out since it
    /// does not affect results.
    pub fn echo(&self) -> String {
        let mut parts = vec![format!("command={}", self.command), format!("model={}", self.model)];
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                parts.push(format!("{}={}", k, v));
            }
        };
        push("m", self.m.map(|m| m.to_string()));
        push("alpha", (!self.alphas.is_empty()).then(|| list(&self.alphas)));
        push("tol", self.tol.map(|t| t.to_string()));
        push("max_iter", self.max_iter.map(|t| t.to_string()));
        push("seed", self.seed.map(|t| t.to_string()));
        push("episodes", self.episodes.map(|t| t.to_string()));
        push("horizon", self.horizon.map(|t| t.to_string()));
        push("small_set", (!self.small_set.is_empty()).then(|| list(&self.small_set)));
        push("psi_star", (!self.psi_star.is_empty()).then(|| list(&self.psi_star)));
        for (k, v) in &self.extra {
            push(k, Some(v.clone()));
        }
        parts.join(" ")
    }
}

fn load_model(spec: &str) -> Result<GameModel> {
    let path = Path::new(spec);
    if !path.exists() {
        if let Some(m) = canonical(spec) {
            return Ok(m);
        }
    }
    Ok(io::load(path)?)
}

fn check_grid(g: &GridArgs) -> Result<()> {
    if g.m == 0 {
        return Err(usage("--m must be at least 1"));
    }
    if !(g.tol > 0.0 && g.tol.is_finite()) {
        return Err(usage("--tol must be positive"));
    }
    if g.max_iter == 0 {
        return Err(usage("--max-iter must be at least 1"));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(usage(format!("discount {} is outside [0, 1)", alpha)))
    }
}

fn belief_arg(name: &str, probs: &[f64], nx: usize, default: Vec<f64>) -> Result<Belief> {
    let probs = if probs.is_empty() { default } else { probs.to_vec() };
    if probs.len() != nx {
        return Err(usage(format!("--{} needs {} entries, got {}", name, nx, probs.len())));
    }
    Belief::new(probs).map_err(|e| usage(format!("--{}: {}", name, e)))
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{}", text);
            Ok(())
        }
    }
}

fn log_config(cfg: &RunConfig, threads: Option<usize>) {
    info!("resolved config: {:?}", cfg);
    info!("threads: {}", threads.map_or("all".to_string(), |t| t.to_string()));
}

fn build_grid(model: &GameModel, m: u32) -> Result<Arc<SimplexGrid>> {
    Ok(Arc::new(SimplexGrid::build(model.num_states(), m)?))
}

fn cmd_validate(args: &ModelArg) -> Result<bool> {
    let path = Path::new(&args.model);
    let raw = if !path.exists() && canonical(&args.model).is_some() {
        canonical(&args.model).unwrap().into_raw()
    } else {
        io::load_raw(path)?
    };
    let report = model::validate(&raw);
    println!("model: {}", raw.name);
    println!("{}", report);
    Ok(report.is_clean())
}

fn cmd_solve_discounted(args: &SolveDiscounted, threads: Option<usize>) -> Result<bool> {
    check_grid(&args.grid)?;
    check_alpha(args.alpha)?;
    let model = load_model(&args.model.model)?;
    let mut cfg = RunConfig::new("solve-discounted", model.name());
    cfg.m = Some(args.grid.m);
    cfg.alphas = vec![args.alpha];
    cfg.tol = Some(args.grid.tol);
    cfg.max_iter = Some(args.grid.max_iter);
    cfg.output = args.out.clone();
    log_config(&cfg, threads);

    let dynamics = BeliefDynamics::new(&model, build_grid(&model, args.grid.m)?);
    let sol = value_iterate_with(&dynamics, args.alpha, args.grid.tol, args.grid.max_iter)?;
    let strategies = extract_strategies_with(&dynamics, &sol.table)?;
    info!("converged in {} sweeps, residual {:e}", sol.iterations, sol.residual);
    emit(&args.out, &table::render(model.name(), &sol, &strategies, &cfg.echo()))?;
    Ok(true)
}

fn cmd_solve_average(args: &SolveAverage, threads: Option<usize>) -> Result<bool> {
    check_grid(&args.grid)?;
    let alphas = if args.alphas.is_empty() { default_schedule() } else { args.alphas.clone() };
    for &a in &alphas {
        check_alpha(a)?;
    }
    if alphas.windows(2).any(|w| w[1] <= w[0]) || alphas.contains(&0.0) {
        return Err(usage("--alphas must be strictly increasing inside (0, 1)"));
    }
    let model = load_model(&args.model.model)?;
    let psi_star = belief_arg("psi-star", &args.psi_star, model.num_states(), model.initial_belief().to_vec())?;
    let mut cfg = RunConfig::new("solve-average", model.name());
    cfg.m = Some(args.grid.m);
    cfg.alphas = alphas.clone();
    cfg.tol = Some(args.grid.tol);
    cfg.max_iter = Some(args.grid.max_iter);
    cfg.psi_star = psi_star.probs().to_vec();
    cfg.output = args.out.clone();
    log_config(&cfg, threads);

    let grid = build_grid(&model, args.grid.m)?;
    let dynamics = BeliefDynamics::new(&model, grid.clone());
    // one discount at a time so that wall times can be recorded
    let mut run = VanishingDiscountRun { grid: grid.clone(), psi_star: 0, records: Vec::new(), tol: args.grid.tol };
    let mut times = Vec::new();
    let mut failed = None;
    for &alpha in &alphas {
        let start = Instant::now();
        match run_vanishing_discount(&model, grid.clone(), &[alpha], psi_star.probs(), args.grid.tol, args.grid.max_iter) {
            Ok(mut r) => {
                times.push(start.elapsed().as_secs_f64());
                run.psi_star = r.psi_star;
                run.records.append(&mut r.records);
            }
            Err(AverageError::NotConverged { alpha, source, .. }) => {
                failed = Some(format!("alpha = {}: {}", alpha, source));
                break;
            }
            Err(e) => return Err(e.into()),
        }
    }
    if run.records.is_empty() {
        bail!("{}", failed.unwrap_or_default());
    }
    let residuals = (0..run.records.len())
        .map(|k| acoe_residuals_with(&dynamics, &run, k))
        .collect::<Result<Vec<_>, _>>()?;
    for (rec, r) in run.records.iter().zip(&residuals) {
        info!("alpha {}: gamma {:.10}, max |r| {:e}", rec.alpha, rec.gamma, r.max_abs);
    }
    let text = report::gamma_table(&run, &residuals, &cfg.echo(), args.timing.then_some(times.as_slice()));
    emit(&args.out, &text)?;
    if let Some(msg) = failed {
        eprintln!("not converged: {}", msg);
        return Ok(false);
    }
    Ok(true)
}

fn parse_strategy(spec: &str, side: Side, model: &GameModel) -> Result<Strategy> {
    let n = match side {
        Side::Row => model.num_actions_p1(),
        Side::Col => model.num_actions_p2(),
    };
    let (kind, arg) = spec.split_once(':').unwrap_or((spec, ""));
    match kind {
        "uniform" => Ok(Strategy::uniform(side)),
        "pure" => {
            let a: usize = arg.parse().map_err(|_| usage(format!("bad action in `{}`", spec)))?;
            if a >= n {
                return Err(usage(format!("action {} out of range (player has {})", a, n)));
            }
            Ok(Strategy::pure(side, n, a))
        }
        "mixed" => {
            let probs = arg
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| usage(format!("bad probabilities in `{}`", spec)))?;
            if probs.len() != n {
                return Err(usage(format!("`{}` needs {} probabilities", spec, n)));
            }
            let a = MixedAction::new(probs).ok_or_else(|| usage(format!("`{}` is not a distribution", spec)))?;
            Ok(Strategy::fixed(side, a))
        }
        "table" => {
            let t = table::read(Path::new(arg))?;
            if t.values.grid.nx() != model.num_states() {
                bail!("table has {} states, model has {}", t.values.grid.nx(), model.num_states());
            }
            Ok(Strategy::from_table(&t.strategies, side))
        }
        _ => Err(usage(format!("unknown strategy `{}`", spec))),
    }
}

fn check_rollout(r: &RolloutArgs) -> Result<()> {
    if r.episodes == 0 || r.horizon == 0 {
        return Err(usage("--episodes and --horizon must be at least 1"));
    }
    Ok(())
}

fn cmd_simulate(args: &Simulate, threads: Option<usize>) -> Result<bool> {
    check_rollout(&args.rollout)?;
    let model = load_model(&args.model.model)?;
    let s1 = parse_strategy(&args.p1, Side::Row, &model)?;
    let s2 = parse_strategy(&args.p2, Side::Col, &model)?;
    let mut cfg = RunConfig::new("simulate", model.name());
    cfg.seed = Some(args.rollout.seed);
    cfg.episodes = Some(args.rollout.episodes);
    cfg.horizon = Some(args.rollout.horizon);
    cfg.output = args.out.clone();
    cfg.extra("p1", &args.p1);
    cfg.extra("p2", &args.p2);
    log_config(&cfg, threads);

    let r = args.rollout;
    let eq = payoff_equivalence_test(&model, &s1, &s2, r.episodes, r.horizon, r.seed)?;
    info!("hidden {:.6} belief {:.6} diff {:e}", eq.hidden.mean_avg_payoff, eq.belief.mean_avg_payoff, eq.difference);
    emit(&args.out, &report::simulation(&eq, &cfg.echo()))?;
    Ok(eq.pass)
}

fn cmd_saddle(args: &Saddle, threads: Option<usize>) -> Result<bool> {
    check_rollout(&args.rollout)?;
    if !(args.budget >= 0.0) {
        return Err(usage("--budget must be nonnegative"));
    }
    let model = load_model(&args.model.model)?;
    let t = table::read(&args.table)?;
    if t.values.grid.nx() != model.num_states() {
        bail!("table has {} states, model has {}", t.values.grid.nx(), model.num_states());
    }
    let mut cfg = RunConfig::new("saddle", model.name());
    cfg.seed = Some(args.rollout.seed);
    cfg.episodes = Some(args.rollout.episodes);
    cfg.horizon = Some(args.rollout.horizon);
    cfg.output = args.out.clone();
    cfg.extra("table_model", &t.model);
    cfg.extra("table_m", t.values.grid.resolution());
    cfg.extra("table_alpha", t.values.alpha);
    cfg.extra("gamma", args.gamma);
    cfg.extra("budget", args.budget);
    log_config(&cfg, threads);

    let pool = default_adversary_pool(&model, &t.strategies);
    let r = args.rollout;
    let rep = saddle_test(&model, &t.strategies, args.gamma, &pool, r.episodes, r.horizon, r.seed, args.budget)?;
    for row in &rep.rows {
        info!("{} ({}): {:.6} vs {:.6} {}", row.adversary, row.side, row.mean, row.bound, row.pass);
    }
    emit(&args.out, &report::saddle(&rep, &cfg.echo()))?;
    Ok(rep.pass())
}

fn cmd_couple(args: &Couple, threads: Option<usize>) -> Result<bool> {
    check_grid(&args.grid)?;
    check_alpha(args.alpha)?;
    if args.samples == 0 {
        return Err(usage("--samples must be at least 1"));
    }
    let model = load_model(&args.model.model)?;
    let nx = model.num_states();
    let small_set: Vec<usize> = if args.small_set.is_empty() { (0..nx).collect() } else { args.small_set.clone() };
    let psi_hat = belief_arg("psi-hat", &args.psi_hat, nx, Belief::point_mass(nx, 0).into_inner())?;
    let psi_tilde = belief_arg("psi-tilde", &args.psi_tilde, nx, Belief::point_mass(nx, nx - 1).into_inner())?;
    let mut cfg = RunConfig::new("couple", model.name());
    cfg.m = Some(args.grid.m);
    cfg.alphas = vec![args.alpha];
    cfg.tol = Some(args.grid.tol);
    cfg.max_iter = Some(args.grid.max_iter);
    cfg.seed = Some(args.seed);
    cfg.small_set = small_set.clone();
    cfg.output = args.out.clone();
    cfg.extra("psi_hat", list(psi_hat.probs()));
    cfg.extra("psi_tilde", list(psi_tilde.probs()));
    cfg.extra("samples", args.samples);
    cfg.extra("horizon_cap", args.horizon_cap);
    cfg.extra("split", format!("{:?}", args.split).to_lowercase());
    log_config(&cfg, threads);

    let split = match args.split {
        SplitArg::Auto => SplitChainConfig::new(&model, &small_set),
        SplitArg::Product => SplitChainConfig::with_split(&model, &small_set, ObservationSplit::Product),
        SplitArg::Conditional => SplitChainConfig::with_split(&model, &small_set, ObservationSplit::Conditional),
    }?;
    info!("delta = {}, observation split {:?}", split.delta(), split.split());

    let dynamics = BeliefDynamics::new(&model, build_grid(&model, args.grid.m)?);
    let sol = value_iterate_with(&dynamics, args.alpha, args.grid.tol, args.grid.max_iter)?;
    let strategies = extract_strategies_with(&dynamics, &sol.table)?;
    let bound = check_value_difference_bound(
        &model,
        &sol,
        &strategies,
        &psi_hat,
        &psi_tilde,
        &split,
        args.samples,
        args.horizon_cap,
        args.seed,
    )?;
    // with K = X every arrival is in K x K, so tau + 1 is geometric(delta)
    let ks = (split.small_set().len() == nx && bound.estimate.censored == 0).then(|| {
        let samples: Vec<u64> = bound.estimate.uncensored().iter().map(|t| t + 1).collect();
        let q = 1.0 - split.delta();
        let d = ks_statistic_discrete(&samples, |k| 1.0 - q.powf(k as f64));
        kolmogorov_survival(d * (samples.len() as f64).sqrt())
    });
    let lyap = model.lyapunov().map(|c| validate_lyapunov(&model, c));
    info!("|dV| = {:e}, bound {:e}", bound.value_difference, bound.bound);
    emit(&args.out, &report::coupling(&split, &bound, ks, lyap.as_ref(), &cfg.echo()))?;
    Ok(bound.pass && lyap.as_ref().is_none_or(|l| l.pass()))
}

/// Runs one parsed command; `Ok(false)` means a check failed.
pub fn run(cli: &Cli) -> Result<bool> {
    let threads = cli.threads;
    match &cli.command {
        Command::Validate(a) => cmd_validate(a),
        Command::SolveDiscounted(a) => cmd_solve_discounted(a, threads),
        Command::SolveAverage(a) => cmd_solve_average(a, threads),
        Command::Simulate(a) => cmd_simulate(a, threads),
        Command::Saddle(a) => cmd_saddle(a, threads),
        Command::Couple(a) => cmd_couple(a, threads),
    }
}

pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if cli.threads == Some(0) {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(2);
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {}", e);
            return ExitCode::from(1);
        }
    };
    match pool.install(|| run(&cli)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("error: {}", e);
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::from(1)
        }
    }
}
