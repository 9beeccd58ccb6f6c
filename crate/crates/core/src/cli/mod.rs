//! Command-line front end: `estimate`, `loocv` and `bench`.
//!
//! Exit codes are 0 on success, 2 for usage, parse or estimator errors and 3
//! when a sweep finishes with failed cells.

pub mod config;
pub mod matrix_io;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{Map, Value};

pub use config::{config_from_value, load_config, BenchConfig};
pub use matrix_io::{
    format_row, parse_matrix_csv, read_matrix_csv, write_matrix, write_matrix_csv,
};

use crate::error::{invalid, Error, Result};
use crate::estimators::{estimate, EstimatorSpec};
use crate::harness::{
    emit_csv, emit_json, loocv_error, run_sweep_with_progress, write_csv, CellProgress,
};
use crate::scalar::Real;
use crate::thresholds::ThresholdSampleCount;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;

/// Environment variable giving the default worker count for `bench`.
pub const THREADS_ENV: &str = "ROBUST_MEAN_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "robust-mean",
    version,
    about = "Robust mean estimation in high dimensions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the mean of a matrix CSV (one sample per row).
    Estimate(EstimateArgs),
    /// Leave-one-out error of an estimator on a matrix CSV.
    Loocv(EstimateArgs),
    /// Run a benchmark sweep described by a TOML or JSON config.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ThresholdArg {
    Legacy,
    #[value(name = "low_n", alias = "low-n")]
    LowN,
}

#[derive(Debug, Args)]
struct EstimatorArgs {
    /// Estimator name, e.g. que_low_n, ev_filtering_legacy, lrv or
    /// que_low_n+trace+halt.
    #[arg(long, short = 'e', default_value = "que_low_n")]
    estimator: String,
    /// Expected corruption fraction.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, value_enum)]
    threshold: Option<ThresholdArg>,
    #[arg(long)]
    early_halt: bool,
    #[arg(long)]
    trace_scale: bool,
    /// Evaluate thresholds at the original sample count.
    #[arg(long)]
    fixed_threshold_n: bool,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    gamma_slack: Option<f64>,
    #[arg(long)]
    gamma_iters: Option<usize>,
    #[arg(long)]
    gamma_frac: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    /// gaussian_tail, randomized or fixed.
    #[arg(long)]
    pruning_rule: Option<String>,
    /// gaussian or general.
    #[arg(long)]
    weighting_rule: Option<String>,
    /// Initial estimator for lee_valiant.
    #[arg(long)]
    initial: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    /// Matrix CSV, optional header row.
    #[arg(long, short = 'i')]
    input: PathBuf,
    #[command(flatten)]
    est: EstimatorArgs,
    /// Write the result here instead of stdout.
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "f64")]
    precision: Precision,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, short = 'c')]
    config: PathBuf,
    /// Results CSV; overrides the config's `out`. Defaults to stdout.
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
    /// Also write the results as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Worker threads (default: $ROBUST_MEAN_THREADS, else all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value = "f64")]
    precision: Precision,
    /// Suppress per-cell progress lines.
    #[arg(long, short = 'q')]
    quiet: bool,
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Estimate(a) => cmd_estimate(&a).map(|_| EXIT_OK),
        Command::Loocv(a) => cmd_loocv(&a).map(|_| EXIT_OK),
        Command::Bench(a) => cmd_bench(&a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

/// Fold command-line estimator flags into a spec.
fn estimator_spec(a: &EstimatorArgs) -> Result<EstimatorSpec> {
    let mut m = Map::new();
    m.insert("name".into(), Value::from(a.estimator.clone()));
    let mut put = |k: &str, v: Option<Value>| {
        if let Some(v) = v {
            m.insert(k.into(), v);
        }
    };
    put("tau", a.tau.map(Value::from));
    put("k", a.k.map(Value::from));
    put("c", a.c.map(Value::from));
    put("alpha", a.alpha.map(Value::from));
    put("gamma_slack", a.gamma_slack.map(Value::from));
    put("gamma_iters", a.gamma_iters.map(Value::from));
    put("gamma_frac", a.gamma_frac.map(Value::from));
    put("t", a.t.map(Value::from));
    put("pruning_rule", a.pruning_rule.clone().map(Value::from));
    put("weighting_rule", a.weighting_rule.clone().map(Value::from));
    put("initial", a.initial.clone().map(Value::from));
    put(
        "threshold_mode",
        a.threshold.map(|t| {
            Value::from(match t {
                ThresholdArg::Legacy => "legacy",
                ThresholdArg::LowN => "low_n",
            })
        }),
    );
    let mut spec = config::estimator_from_map(&m, true).map_err(invalid)?;
    spec.early_halting |= a.early_halt;
    spec.trace_scaling |= a.trace_scale;
    if a.fixed_threshold_n {
        spec.threshold_count = ThresholdSampleCount::Fixed;
    }
    Ok(spec)
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::fs::File::create(p).map_err(|e| Error::Io {
            path: p.display().to_string(),
            message: e.to_string(),
        })?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn write_line(path: Option<&Path>, line: &str) -> Result<()> {
    let mut w = open_out(path)?;
    let where_ = path
        .map(|p| p.display().to_string())
        .unwrap_or_else(|| "stdout".into());
    writeln!(w, "{line}")
        .and_then(|_| w.flush())
        .map_err(|e| Error::Io {
            path: where_,
            message: e.to_string(),
        })
}

fn cmd_estimate(a: &EstimateArgs) -> Result<()> {
    let spec = estimator_spec(&a.est)?;
    match a.precision {
        Precision::F64 => estimate_with::<f64>(a, &spec),
        Precision::F32 => estimate_with::<f32>(a, &spec),
    }
}

fn estimate_with<T: Real>(a: &EstimateArgs, spec: &EstimatorSpec) -> Result<()> {
    let x = read_matrix_csv::<T>(&a.input)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.est.seed);
    let report = estimate(&x, spec, &mut rng)?;
    write_line(a.out.as_deref(), &format_row(&report.mean))?;
    let flags: Vec<String> = report
        .flags
        .iter()
        .map(|f| {
            serde_json::to_value(f)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default()
        })
        .collect();
    eprintln!("estimator={}", spec.name());
    eprintln!("pruned_count={}", report.pruned_count);
    eprintln!("iterations={}", report.iterations);
    eprintln!("halted_early={}", report.halted_early);
    eprintln!("final_top_eigenvalue={}", report.final_top_eigenvalue);
    eprintln!("flags={}", flags.join(","));
    Ok(())
}

fn cmd_loocv(a: &EstimateArgs) -> Result<()> {
    let spec = estimator_spec(&a.est)?;
    let err = match a.precision {
        Precision::F64 => loocv_with::<f64>(a, &spec)?,
        Precision::F32 => loocv_with::<f32>(a, &spec)?,
    };
    write_line(a.out.as_deref(), &err.to_string())
}

fn loocv_with<T: Real>(a: &EstimateArgs, spec: &EstimatorSpec) -> Result<f64> {
    let x = read_matrix_csv::<T>(&a.input)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.est.seed);
    loocv_error(&x, spec, &mut rng)
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    if let Some(t) = flag {
        return Ok(Some(t));
    }
    match std::env::var(THREADS_ENV) {
        Ok(s) if !s.trim().is_empty() => s
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| invalid(format!("{THREADS_ENV} must be a thread count, got '{s}'"))),
        _ => Ok(None),
    }
}

fn cmd_bench(a: &BenchArgs) -> Result<i32> {
    let bench = load_config(&a.config)?;
    if let Some(t) = thread_count(a.threads)? {
        // a pool may already exist when called in-process; keep it
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global();
    }
    let total = bench.sweep.values.len() * bench.sweep.runs;
    let quiet = a.quiet;
    let start = Instant::now();
    let progress = move |p: &CellProgress| {
        if !quiet {
            eprintln!(
                "value={} run={} time={:.3}s failures={} elapsed={:.1}s of {total} trials",
                p.value,
                p.run,
                p.seconds,
                p.failures,
                start.elapsed().as_secs_f64()
            );
        }
    };
    let result = match a.precision {
        Precision::F64 => run_sweep_with_progress::<f64>(&bench.sweep, &progress)?,
        Precision::F32 => run_sweep_with_progress::<f32>(&bench.sweep, &progress)?,
    };
    match a.out.clone().or(bench.out) {
        Some(p) => emit_csv(&result, &p)?,
        None => write_csv(&result, std::io::stdout().lock()).map_err(|e| Error::Io {
            path: "stdout".into(),
            message: e.to_string(),
        })?,
    }
    if let Some(p) = a.json.clone().or(bench.json) {
        emit_json(&result, &p)?;
    }
    if result.is_partial() {
        for f in &result.failures {
            eprintln!(
                "failed: value={} estimator={} run={}: {}",
                f.value, f.estimator, f.run, f.message
            );
        }
        return Ok(EXIT_PARTIAL);
    }
    Ok(EXIT_OK)
}
