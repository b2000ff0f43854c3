//! Command-line front end: `generate`, `analyze`, `solve` and `bench`.
//!
//! Exit codes: 0 success, 1 invalid input or parameters, 2 numerical failure,
//! 3 I/O or parse failure.

pub mod bench;
pub mod config;
pub mod generate;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::data::{
    read_dataset, save_dataset, Dataset, PowerIteration, SparsityReport, ZeroColumnPolicy,
};
use crate::error::{Error, ErrorKind, Result};
use crate::loss::{LossKind, Objective};
use crate::schedule::{eta_star, p_star, sigma, Sampling};
use crate::solver::{AccelMode, SolveOptions, StopReason, StoppingRule};

use bench::{run_bench, BenchConfig, BenchReport, ReferenceConfig};
use config::{resolve, run_resolved, Algorithm, AutoOr, SolverSpec};
use generate::{generate, GenerateConfig};

#[derive(Debug, Parser)]
#[command(
    name = "accelcd",
    version,
    about = "Accelerated gradient and parallel coordinate descent"
)]
pub struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "ACCELCD_WORKERS", default_value_t = 0)]
    pub workers: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic problem and its planted weights.
    Generate(GenerateArgs),
    /// Report sparsity measures and parameter choices for a dataset.
    Analyze(AnalyzeArgs),
    /// Run one solver and write its trace, summary and solution.
    Solve(SolveArgs),
    /// Compare solvers over several seeds against a reference optimum.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Square,
    Logistic,
}

impl From<LossArg> for LossKind {
    fn from(l: LossArg) -> Self {
        match l {
            LossArg::Square => LossKind::Square,
            LossArg::Logistic => LossKind::Logistic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplingArg {
    UniformSubset,
    BlockPartition,
}

impl From<SamplingArg> for Sampling {
    fn from(s: SamplingArg) -> Self {
        match s {
            SamplingArg::UniformSubset => Sampling::UniformSubset,
            SamplingArg::BlockPartition => Sampling::BlockPartition,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Naive,
    Implicit,
}

impl From<ModeArg> for AccelMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Naive => AccelMode::Naive,
            ModeArg::Implicit => AccelMode::Implicit,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long, default_value_t = 0.1)]
    pub density: f64,
    #[arg(long, value_enum, default_value_t = LossArg::Square)]
    pub loss: LossArg,
    #[arg(long, default_value_t = 0.0)]
    pub noise_std: f64,
    /// Nonzeros in the planted weights (default: all d).
    #[arg(long)]
    pub w_star_nnz: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    pub row_scale_decades: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Dataset output path.
    #[arg(long)]
    pub out: PathBuf,
    /// Planted weights, one value per line.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    #[arg(long, default_value_t = 1e-9)]
    pub power_tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub power_max_iter: usize,
    #[arg(long, default_value_t = 0)]
    pub power_seed: u64,
}

impl PowerArgs {
    fn config(&self) -> PowerIteration {
        PowerIteration {
            tol: self.power_tol,
            max_iter: self.power_max_iter,
            seed: self.power_seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Drop empty feature columns instead of failing.
    #[arg(long)]
    pub drop_empty_columns: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value_t = LossArg::Square)]
    pub loss: LossArg,
    #[command(flatten)]
    pub power: PowerArgs,
    /// JSON report path (printed to stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StopArgs {
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 0.0)]
    pub objective_tol: f64,
    #[arg(long, default_value_t = 0.0)]
    pub grad_norm_tol: f64,
    #[arg(long, default_value_t = 1)]
    pub checkpoint_every: usize,
}

impl StopArgs {
    fn rule(&self) -> StoppingRule {
        StoppingRule {
            max_iter: self.max_iter,
            objective_tol: self.objective_tol,
            grad_norm_tol: self.grad_norm_tol,
            checkpoint_every: self.checkpoint_every,
        }
    }
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, value_enum, default_value_t = LossArg::Square)]
    pub loss: LossArg,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    /// Parallel updates per iteration, or `auto`.
    #[arg(long, default_value = "auto")]
    pub p: AutoOr<usize>,
    /// Step coefficient, or `auto` for the optimal choice.
    #[arg(long, default_value = "auto")]
    pub eta: AutoOr<f64>,
    #[arg(long, value_enum, default_value_t = SamplingArg::UniformSubset)]
    pub sampling: SamplingArg,
    #[arg(long, value_enum, default_value_t = ModeArg::Implicit)]
    pub mode: ModeArg,
    /// Use the spectral estimate even if power iteration did not converge.
    #[arg(long)]
    pub force_rho: bool,
    #[command(flatten)]
    pub stop: StopArgs,
    #[command(flatten)]
    pub power: PowerArgs,
    /// Leave the elapsed_ns column empty.
    #[arg(long)]
    pub no_timing: bool,
}

impl SolverArgs {
    fn spec(&self, algorithm: Algorithm) -> SolverSpec {
        SolverSpec {
            algorithm,
            p: self.p,
            eta: self.eta,
            sampling: self.sampling.into(),
            mode: self.mode.into(),
            force_rho: self.force_rho,
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum)]
    pub algorithm: Algorithm,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Known optimal value, used to fill the suboptimality column.
    #[arg(long)]
    pub f_star: Option<f64>,
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
    #[arg(long)]
    pub summary_out: Option<PathBuf>,
    /// Final weights in the original feature scale, one per line.
    #[arg(long)]
    pub solution_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Algorithms to compare.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Algorithm::Shotgun, Algorithm::AccelShotgun])]
    pub algorithms: Vec<Algorithm>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Number of seeds per algorithm.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    /// First seed; seeds are consecutive from here.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub window_lo: u64,
    #[arg(long, default_value_t = 1000)]
    pub window_hi: u64,
    /// Report the theoretical bound next to the mean suboptimality.
    #[arg(long)]
    pub bound_check: bool,
    #[arg(long, default_value_t = 1.0)]
    pub bound_slack: f64,
    /// Run seeds concurrently (timing is not recorded).
    #[arg(long)]
    pub concurrent: bool,
    #[arg(long, default_value_t = 1e-12)]
    pub reference_tol: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub reference_max_iter: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Maps an error to the process exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err.kind() {
        ErrorKind::Validation => 1,
        ErrorKind::Numerical => 2,
        ErrorKind::Io => 3,
    }
}

/// Parses `args` and runs the command. Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let workers = cli.workers;
    crate::solver::with_workers(workers, move || match cli.command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Analyze(a) => cmd_analyze(&a),
        Command::Solve(a) => cmd_solve(&a, workers),
        Command::Bench(a) => cmd_bench(&a, workers),
    })?
}

fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    let cfg = GenerateConfig {
        n: a.n,
        d: a.d,
        density: a.density,
        loss: a.loss.into(),
        noise_std: a.noise_std,
        w_star_nnz: a.w_star_nnz.unwrap_or(a.d),
        row_scale_decades: a.row_scale_decades,
        seed: a.seed,
    };
    let problem = generate(&cfg)?;
    save_dataset(&problem.dataset, &a.out)?;
    if let Some(path) = &a.truth {
        write_vector(path, &problem.w_star)?;
    }
    Ok(())
}

struct Loaded {
    normalized: Dataset,
    dropped: Vec<usize>,
    sha256: String,
}

fn load(args: &DataArgs) -> Result<Loaded> {
    let bytes = fs::read(&args.dataset)?;
    let sha256 = hex::encode(Sha256::digest(&bytes));
    let raw = read_dataset(&bytes[..])?;
    let policy = if args.drop_empty_columns {
        ZeroColumnPolicy::Drop
    } else {
        ZeroColumnPolicy::Error
    };
    let (normalized, dropped) = raw.normalize(policy)?;
    Ok(Loaded {
        normalized,
        dropped,
        sha256,
    })
}

#[derive(Debug, Serialize)]
struct ParameterRow {
    p: usize,
    sigma: f64,
    eta_star: f64,
    /// `(1 + sigma)/2`, the load at unit step.
    unit_step_load: f64,
}

#[derive(Debug, Serialize)]
struct AnalyzeReport {
    dataset_sha256: String,
    n: usize,
    d: usize,
    nnz: usize,
    dropped_columns: Vec<usize>,
    kappa: usize,
    kappa_bar: f64,
    rho: f64,
    rho_converged: bool,
    /// `rho <= kappa_bar <= kappa`, with 1e-6 slack on the spectral estimate.
    ordering_holds: bool,
    beta: f64,
    eta_rho: f64,
    eta_kappa: f64,
    eta_kappa_bar: f64,
    p_star: usize,
    parameters: Vec<ParameterRow>,
}

fn cmd_analyze(a: &AnalyzeArgs) -> Result<()> {
    let loaded = load(&a.data)?;
    let x = loaded.normalized.x();
    let report = SparsityReport::compute(x, a.power.config())?;
    let d = x.n_cols();
    let beta = LossKind::from(a.loss).beta();
    let mut ps: Vec<usize> = std::iter::successors(Some(1usize), |p| p.checked_mul(2))
        .take_while(|&p| p < d)
        .chain([d, p_star(d, report.rho)])
        .collect();
    ps.sort_unstable();
    ps.dedup();
    let parameters = ps
        .into_iter()
        .map(|p| {
            let s = sigma(p, d, report.rho, Sampling::UniformSubset);
            ParameterRow {
                p,
                sigma: s,
                eta_star: eta_star(s),
                unit_step_load: 0.5 * (1.0 + s),
            }
        })
        .collect();
    let ordering_holds =
        report.rho <= report.kappa_bar + 1e-6 && report.kappa_bar <= report.kappa as f64 + 1e-12;
    if !report.rho_converged {
        eprintln!(
            "warning: power iteration did not converge; rho estimate {}",
            report.rho
        );
    }
    if !ordering_holds {
        eprintln!(
            "warning: expected rho <= kappa_bar <= kappa, got rho={} kappa_bar={} kappa={}",
            report.rho, report.kappa_bar, report.kappa
        );
    }
    let out = AnalyzeReport {
        dataset_sha256: loaded.sha256,
        n: x.n_rows(),
        d,
        nnz: x.nnz(),
        dropped_columns: loaded.dropped,
        kappa: report.kappa,
        kappa_bar: report.kappa_bar,
        rho: report.rho,
        rho_converged: report.rho_converged,
        ordering_holds,
        beta,
        eta_rho: 1.0 / (report.rho * beta),
        eta_kappa: 1.0 / (report.kappa as f64 * beta),
        eta_kappa_bar: 1.0 / (report.kappa_bar * beta),
        p_star: p_star(d, report.rho),
        parameters,
    };
    emit_json(&out, a.out.as_deref())
}

#[derive(Debug, Serialize)]
struct SolveSummary {
    dataset_sha256: String,
    algorithm: Algorithm,
    loss: LossKind,
    lambda: f64,
    seed: u64,
    workers: usize,
    n: usize,
    d: usize,
    nnz: usize,
    dropped_columns: Vec<usize>,
    kappa: usize,
    kappa_bar: f64,
    rho: f64,
    rho_converged: bool,
    c: Option<f64>,
    p: Option<usize>,
    eta: Option<f64>,
    sigma: Option<f64>,
    load: Option<f64>,
    sampling: Option<Sampling>,
    mode: Option<AccelMode>,
    auto_resolved: Vec<&'static str>,
    warnings: Vec<String>,
    max_iter: usize,
    objective_tol: f64,
    grad_norm_tol: f64,
    checkpoint_every: usize,
    f_star: Option<f64>,
    stop_reason: StopReason,
    final_objective: f64,
    iterations: usize,
    wall_ns: Option<u64>,
    step_touches: u64,
    maintenance_touches: u64,
}

fn cmd_solve(a: &SolveArgs, workers: usize) -> Result<()> {
    let stop = a.solver.stop.rule();
    stop.validate()?;
    let loaded = load(&a.data)?;
    let data = &loaded.normalized;
    let x = data.x();
    let obj = Objective::new(data, a.solver.loss.into(), a.solver.lambda)?;
    if a.algorithm == Algorithm::AccelShotgun && a.solver.lambda > 0.0 {
        return Err(Error::RegularizationUnsupported(a.solver.lambda));
    }
    let report = SparsityReport::compute(x, a.solver.power.config())?;
    let resolved = resolve(&a.solver.spec(a.algorithm), &report, x.n_cols())?;
    for w in &resolved.warnings {
        eprintln!("warning: {w}");
    }
    let opts = SolveOptions {
        stop,
        f_star: a.f_star,
        record_time: !a.solver.no_timing,
        trace_residual: true,
        workers: 0,
    };
    let result = run_resolved(obj, &resolved, a.seed, None, &opts)?;

    if let Some(path) = &a.trace_out {
        result.trace.save(path)?;
    }
    if let Some(path) = &a.solution_out {
        write_vector(path, &result.w_final)?;
    }
    let summary = SolveSummary {
        dataset_sha256: loaded.sha256,
        algorithm: a.algorithm,
        loss: obj.loss(),
        lambda: obj.lambda(),
        seed: a.seed,
        workers,
        n: x.n_rows(),
        d: x.n_cols(),
        nnz: x.nnz(),
        dropped_columns: loaded.dropped,
        kappa: report.kappa,
        kappa_bar: report.kappa_bar,
        rho: report.rho,
        rho_converged: report.rho_converged,
        c: resolved.c,
        p: resolved.p,
        eta: resolved.eta,
        sigma: resolved.sigma,
        load: resolved.load,
        sampling: resolved.sampling,
        mode: resolved.mode,
        auto_resolved: resolved.auto.clone(),
        warnings: resolved.warnings.clone(),
        max_iter: stop.max_iter,
        objective_tol: stop.objective_tol,
        grad_norm_tol: stop.grad_norm_tol,
        checkpoint_every: stop.checkpoint_every,
        f_star: a.f_star,
        stop_reason: result.stop_reason,
        final_objective: result.final_objective,
        iterations: result.iterations,
        wall_ns: opts.record_time.then_some(result.wall_ns),
        step_touches: result.stats.step_touches,
        maintenance_touches: result.stats.maintenance_touches,
    };
    emit_json(&summary, a.summary_out.as_deref())
}

#[derive(Debug, Serialize)]
struct MeanRow {
    iter: u64,
    mean_suboptimality: f64,
    bound: Option<f64>,
}

fn cmd_bench(a: &BenchArgs, workers: usize) -> Result<()> {
    if a.seeds == 0 {
        return Err(Error::InvalidParameter("--seeds must be at least 1".into()));
    }
    if a.window_lo > a.window_hi {
        return Err(Error::InvalidParameter(
            "window_lo exceeds window_hi".into(),
        ));
    }
    let stop = a.solver.stop.rule();
    stop.validate()?;
    let loaded = load(&a.data)?;
    let mut cfg = BenchConfig::new(
        a.algorithms.iter().map(|&alg| a.solver.spec(alg)).collect(),
        (a.seed..a.seed + a.seeds).collect(),
    );
    cfg.loss = a.solver.loss.into();
    cfg.lambda = a.solver.lambda;
    cfg.stop = stop;
    cfg.window = (a.window_lo, a.window_hi);
    cfg.bound_check = a.bound_check;
    cfg.bound_slack = a.bound_slack;
    cfg.concurrent = a.concurrent;
    cfg.record_time = !a.solver.no_timing;
    cfg.workers = workers;
    cfg.power = a.solver.power.config();
    cfg.reference = ReferenceConfig {
        grad_tol: a.reference_tol,
        max_iter: a.reference_max_iter,
        ..ReferenceConfig::default()
    };

    let report = run_bench(&loaded.normalized, &cfg, Some(loaded.sha256))?;
    write_bench(&report, &a.out_dir)
}

fn write_bench(report: &BenchReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for alg in &report.algorithms {
        let mut w = csv::Writer::from_path(dir.join(format!("{}_mean.csv", alg.label)))?;
        for p in &alg.mean_trace {
            w.serialize(MeanRow {
                iter: p.iter,
                mean_suboptimality: p.mean_suboptimality,
                bound: p.bound,
            })?;
        }
        w.flush()?;
        for (seed, run) in alg.seeds.iter().zip(&alg.runs) {
            run.trace
                .save(dir.join(format!("{}_seed{}.csv", alg.label, seed)))?;
        }
    }
    emit_json(report, Some(&dir.join("bench.json")))
}

fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => fs::write(p, text + "\n")?,
        None => match writeln!(std::io::stdout().lock(), "{text}") {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e.into()),
            _ => {}
        },
    }
    Ok(())
}

/// One value per line, shortest round-trip form.
pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for x in v {
        writeln!(out, "{x}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    fs::read_to_string(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            l.trim().parse().map_err(|_| Error::Parse {
                line: k + 1,
                reason: format!("'{l}' is not a number"),
            })
        })
        .collect()
}
