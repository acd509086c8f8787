//! Command-line front end: figure jobs, CSV output and the run manifest.
//!
//! Every run writes `<out>/<figure>.csv` (or `validate.json`) followed by
//! `<out>/<figure>.manifest.json`. CSV files start with `#` provenance lines
//! and contain no timing information, so equal inputs give byte-identical files.

pub mod figures;
pub mod table;
pub mod validate;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analytics::{AnalyticsError, Receiver};
use crate::estimation::Estimator;
use crate::montecarlo::{McError, SweepAxis};
use crate::optimizer::{OptimizerError, SolverParams};
use crate::scenario::{load_scenario, ScenarioError, SystemConfig};
pub use figures::{FigureId, RunContext};
use table::Table;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    MonteCarlo(#[from] McError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error("json: {0}")]
    Json(String),
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io { path: path.display().to_string(), message: e.to_string() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReceiverArg {
    Mrc,
    Zf,
}

impl From<ReceiverArg> for Receiver {
    fn from(r: ReceiverArg) -> Self {
        match r {
            ReceiverArg::Mrc => Receiver::Mrc,
            ReceiverArg::Zf => Receiver::Zf,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    Ls,
    Mmse,
}

impl From<EstimatorArg> for Estimator {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Ls => Estimator::Ls,
            EstimatorArg::Mmse => Estimator::Mmse,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    M,
    R,
    Snr,
    EffectiveSnr,
}

impl From<AxisArg> for SweepAxis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::M => SweepAxis::M,
            AxisArg::R => SweepAxis::R,
            AxisArg::Snr => SweepAxis::Snr,
            AxisArg::EffectiveSnr => SweepAxis::EffectiveSnr,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

/// Figure generator for wirelessly powered backscatter networks.
#[derive(Debug, Clone, Parser)]
#[command(name = "wpbc", version)]
pub struct Args {
    /// Scenario file (`key = value` lines); built-in defaults when omitted.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Job to run.
    #[arg(long, value_enum)]
    pub figure: FigureId,
    /// Monte Carlo draws per point.
    #[arg(long, default_value_t = 10_000)]
    pub draws: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Scenario override `KEY=VALUE`, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Optimize the CE duration and pilot power as well.
    #[arg(long, value_enum, default_value_t = Switch::Off)]
    pub optimize_ce: Switch,
    #[arg(long, value_enum, default_value_t = ReceiverArg::Mrc)]
    pub receiver: ReceiverArg,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Ls)]
    pub estimator: EstimatorArg,
    /// Axis of `--figure sweep`.
    #[arg(long, value_enum)]
    pub axis: Option<AxisArg>,
    /// Comma-separated axis values of `--figure sweep`.
    #[arg(long, value_delimiter = ',')]
    pub values: Vec<f64>,
    #[arg(long, default_value_t = 16)]
    pub starts: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 0)]
    pub solver_seed: u64,
}

/// Fully resolved job.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub figure: FigureId,
    pub ctx: RunContext,
    pub out: PathBuf,
    pub axis: Option<SweepAxis>,
    pub values: Vec<f64>,
}

impl ExperimentSpec {
    pub fn from_args(args: &Args) -> Result<Self, CliError> {
        let mut cfg = match &args.scenario {
            Some(path) => load_scenario(path)?,
            None => SystemConfig::default(),
        };
        for o in &args.overrides {
            cfg.apply_override(o)?;
        }
        cfg.validate()?;
        if args.draws < 2 {
            return Err(CliError::Usage(format!("--draws must be at least 2, got {}", args.draws)));
        }
        if args.starts == 0 || !(args.tol > 0.0) || args.max_iter == 0 {
            return Err(CliError::Usage("--starts, --tol and --max-iter must be positive".into()));
        }
        let axis = args.axis.map(SweepAxis::from);
        if args.figure == FigureId::Sweep && (axis.is_none() || args.values.is_empty()) {
            return Err(CliError::Usage("--figure sweep needs --axis and --values".into()));
        }
        Ok(Self {
            figure: args.figure,
            ctx: RunContext {
                cfg,
                draws: args.draws,
                seed: args.seed,
                estimator: args.estimator.into(),
                receiver: args.receiver.into(),
                solver: SolverParams {
                    starts: args.starts,
                    tol: args.tol,
                    max_iter: args.max_iter,
                    seed: args.solver_seed,
                    optimize_ce: args.optimize_ce == Switch::On,
                },
            },
            out: args.out.clone(),
            axis,
            values: args.values.clone(),
        })
    }
}

/// Provenance lines written at the top of every CSV.
pub fn provenance(spec: &ExperimentSpec) -> Result<Vec<String>, CliError> {
    let ctx = &spec.ctx;
    let stats = ctx.cfg.link_stats()?;
    let mut lines = vec![
        format!("tool = wpbc {}", env!("CARGO_PKG_VERSION")),
        format!("figure = {}", spec.figure.name()),
        format!("seed = {}", ctx.seed),
        format!("draws = {}", if spec.figure.uses_monte_carlo() { ctx.draws.to_string() } else { "0".into() }),
        format!("estimator = {}", ctx.estimator.name()),
        format!("receiver = {}", ctx.receiver.name()),
        format!("ce_mode = {}", if ctx.solver.optimize_ce { "optimized" } else { "pinned" }),
        format!("alpha = {}", ctx.cfg.alpha),
        format!("p_ce_W = {:?}", ctx.cfg.p_ce),
        format!("tau_W = {:?}", ctx.cfg.tau_value(&stats)),
        format!(
            "solver = starts {} tol {:?} max_iter {} seed {}",
            ctx.solver.starts, ctx.solver.tol, ctx.solver.max_iter, ctx.solver.seed
        ),
    ];
    if let Some(axis) = spec.axis {
        lines.push(format!("axis = {}", axis.name()));
    }
    lines.extend(ctx.cfg.to_scenario_string().lines().map(|l| format!("scenario: {l}")));
    Ok(lines)
}

/// Runs a table-producing figure job.
pub fn build_table(spec: &ExperimentSpec) -> Result<Table, CliError> {
    let ctx = &spec.ctx;
    let mut table = match spec.figure {
        FigureId::F2 => figures::figure2(ctx)?,
        FigureId::F3 => figures::figure3(ctx)?,
        FigureId::F4 => figures::figure4(ctx)?,
        FigureId::F5 => figures::figure5(ctx)?,
        FigureId::F6 => figures::figure6(ctx)?,
        FigureId::F7 => figures::figure7(ctx)?,
        FigureId::F8 => figures::figure8(ctx)?,
        FigureId::F9 => figures::figure9(ctx)?,
        FigureId::F10 => figures::figure10(ctx)?,
        FigureId::Sweep => {
            let axis = spec.axis.ok_or_else(|| CliError::Usage("missing --axis".into()))?;
            figures::custom_sweep(ctx, axis, &spec.values)?
        }
        FigureId::Validate => {
            return Err(CliError::Usage("validate produces a JSON report, not a table".into()))
        }
    };
    table.provenance = provenance(spec)?;
    Ok(table)
}

/// Checksummed output file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

/// Record of one run, written after every output file.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub figure: String,
    pub config: SystemConfig,
    pub seed: u64,
    pub draws: usize,
    pub estimator: Estimator,
    pub receiver: Receiver,
    pub solver: SolverParams,
    pub wall_clock_s: f64,
    pub outputs: Vec<OutputFile>,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
    f.write_all(bytes).map_err(|e| io_err(&tmp, e))?;
    f.sync_all().map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Runs a job and writes its output and manifest; returns the written paths.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<PathBuf>, CliError> {
    let start = Instant::now();
    fs::create_dir_all(&spec.out).map_err(|e| io_err(&spec.out, e))?;
    let name = spec.figure.name();
    let (path, bytes) = if spec.figure == FigureId::Validate {
        let report = validate::validate_suite(&spec.ctx.cfg, spec.ctx.draws, spec.ctx.seed)?;
        let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Json(e.to_string()))?;
        (spec.out.join(format!("{name}.json")), json.into_bytes())
    } else {
        (spec.out.join(format!("{name}.csv")), build_table(spec)?.to_csv().into_bytes())
    };
    write_atomic(&path, &bytes)?;
    let ctx = &spec.ctx;
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        figure: name.to_string(),
        config: ctx.cfg.clone(),
        seed: ctx.seed,
        draws: ctx.draws,
        estimator: ctx.estimator,
        receiver: ctx.receiver,
        solver: ctx.solver,
        wall_clock_s: start.elapsed().as_secs_f64(),
        outputs: vec![OutputFile { path: path.display().to_string(), sha256: sha256_hex(&bytes) }],
    };
    let manifest_path = spec.out.join(format!("{name}.manifest.json"));
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Json(e.to_string()))?;
    write_atomic(&manifest_path, json.as_bytes())?;
    Ok(vec![path, manifest_path])
}

/// Binary entry point; returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match ExperimentSpec::from_args(&args).and_then(|spec| run_experiment(&spec)) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("wpbc: error: {e}");
            1
        }
    }
}
