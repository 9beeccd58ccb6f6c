use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{l2_error, run_trial};
use crate::datagen::{
    assemble_trial, mix_external, InlierSpec, NoiseKind, NoiseSpec, TrialDataset,
};
use crate::error::{invalid, Result};
use crate::estimators::{EstimatorKind, EstimatorSpec};
use crate::numerics::Matrix;
use crate::scalar::Real;

/// Precomputed inlier and outlier samples mixed at rate `η` in place of
/// synthetic data.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalData {
    pub inliers: Matrix<f64>,
    pub outliers: Matrix<f64>,
}

/// Name of the inlier-mean baseline row.
pub const GOOD_SAMPLE_MEAN: &str = "good_sample_mean";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    N,
    D,
    Eta,
    Tau,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::N => "n",
            SweepVariable::D => "d",
            SweepVariable::Eta => "eta",
            SweepVariable::Tau => "tau",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "n" => Some(SweepVariable::N),
            "d" => Some(SweepVariable::D),
            "eta" => Some(SweepVariable::Eta),
            "tau" => Some(SweepVariable::Tau),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub sweep_variable: SweepVariable,
    pub values: Vec<f64>,
    pub n: usize,
    pub d: usize,
    pub eta: f64,
    /// Fixed expected corruption; `None` matches `τ` to `η` (0.1 when `η = 0`).
    pub tau: Option<f64>,
    pub inliers: InlierSpec,
    pub noise: NoiseKind,
    pub estimators: Vec<EstimatorSpec>,
    pub runs: usize,
    pub base_seed: u64,
    /// Apply one random rotation to every trial.
    pub rotate: bool,
    #[serde(skip)]
    pub external: Option<ExternalData>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            sweep_variable: SweepVariable::N,
            values: vec![500.0],
            n: 500,
            d: 500,
            eta: 0.1,
            tau: None,
            inliers: InlierSpec::default(),
            noise: NoiseKind::VarianceShell,
            estimators: Vec::new(),
            runs: 5,
            base_seed: 0,
            rotate: false,
            external: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cell {
    n: usize,
    d: usize,
    eta: f64,
    tau: f64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.values.is_empty() {
            bad.push("values must be non-empty".to_string());
        }
        if self.values.windows(2).any(|w| !(w[0] < w[1])) {
            bad.push("values must be strictly increasing".to_string());
        }
        if self.runs < 1 {
            bad.push("runs must be at least 1".to_string());
        }
        if self.estimators.is_empty() {
            bad.push("estimators must be non-empty".to_string());
        }
        for v in &self.values {
            let ok = match self.sweep_variable {
                SweepVariable::N | SweepVariable::D => *v >= 1.0 && v.fract() == 0.0,
                SweepVariable::Eta | SweepVariable::Tau => (0.0..0.5).contains(v),
            };
            if !ok {
                bad.push(format!(
                    "value {v} is not valid for sweep variable {}",
                    self.sweep_variable.name()
                ));
            }
        }
        if let Some(ext) = &self.external {
            if self.sweep_variable == SweepVariable::D {
                bad.push("external data cannot be swept over d".to_string());
            }
            if self.rotate {
                bad.push("rotate is not supported with external data".to_string());
            }
            if ext.outliers.rows() > 0 && ext.outliers.cols() != ext.inliers.cols() {
                bad.push(format!(
                    "outlier matrix has {} columns, inlier matrix {}",
                    ext.outliers.cols(),
                    ext.inliers.cols()
                ));
            }
        }
        if let Err(e) = self.inliers.validate() {
            bad.push(e.to_string());
        }
        if let Err(e) = NoiseSpec::new(self.noise, self.eta).validate() {
            bad.push(e.to_string());
        }
        for e in &self.estimators {
            if let Err(err) = e.validate() {
                bad.push(format!("estimator {}: {err}", e.name()));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(invalid(bad.join("; ")))
        }
    }

    fn cell(&self, value: f64) -> Cell {
        let mut c = Cell {
            n: self.n,
            d: self.d,
            eta: self.eta,
            tau: 0.0,
        };
        match self.sweep_variable {
            SweepVariable::N => c.n = value as usize,
            SweepVariable::D => c.d = value as usize,
            SweepVariable::Eta => c.eta = value,
            SweepVariable::Tau => {}
        }
        c.tau = match (self.sweep_variable, self.tau) {
            (SweepVariable::Tau, _) => value,
            (_, Some(t)) => t,
            _ if c.eta > 0.0 => c.eta,
            _ => 0.1,
        };
        c
    }

    fn corrupted(&self) -> bool {
        self.values.iter().any(|&v| self.cell(v).eta > 0.0)
    }

    /// Names of every row emitted per sweep value, baselines first.
    pub fn row_names(&self) -> Vec<String> {
        let mut names = vec![GOOD_SAMPLE_MEAN.to_string()];
        let listed: Vec<String> = self.estimators.iter().map(|e| e.name()).collect();
        if self.corrupted() && !listed.iter().any(|n| n == "sample_mean") {
            names.push("sample_mean".to_string());
        }
        names.extend(listed);
        names
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub sweep_var: String,
    pub value: f64,
    pub estimator: String,
    pub mean_error: f64,
    /// Population standard deviation over runs.
    pub std_error: f64,
    pub mean_runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub value: f64,
    pub estimator: String,
    pub run: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub records: Vec<SweepRecord>,
    pub failures: Vec<CellFailure>,
}

impl SweepResult {
    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }

    pub fn get(&self, value: f64, estimator: &str) -> Option<&SweepRecord> {
        self.records
            .iter()
            .find(|r| r.value == value && r.estimator == estimator)
    }
}

/// Progress notice for one finished (value, run) task.
#[derive(Debug, Clone)]
pub struct CellProgress {
    pub value: f64,
    pub run: usize,
    pub seconds: f64,
    pub failures: usize,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix(a: u64, b: u64) -> u64 {
    splitmix64(a ^ splitmix64(b))
}

/// Data seed for run `run` of the `value_index`-th sweep value.
pub fn trial_seed(base_seed: u64, value_index: usize, run: usize) -> u64 {
    mix(mix(splitmix64(base_seed), value_index as u64), run as u64)
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Estimator RNG seed: a function of the trial and the estimator's name only.
pub(crate) fn estimator_seed(trial: u64, name: &str) -> u64 {
    mix(trial, fnv1a(name))
}

type TaskRows = Vec<std::result::Result<(f64, f64), String>>;

pub fn run_sweep<T: Real>(cfg: &SweepConfig) -> Result<SweepResult> {
    run_sweep_with_progress::<T>(cfg, &|_| {})
}

/// Evaluate every (value, run) task, possibly in parallel, then aggregate in
/// sweep order. Per-estimator failures are collected rather than aborting.
pub fn run_sweep_with_progress<T: Real>(
    cfg: &SweepConfig,
    progress: &(dyn Fn(&CellProgress) + Sync),
) -> Result<SweepResult> {
    cfg.validate()?;
    let names = cfg.row_names();
    let mut specs: Vec<Option<EstimatorSpec>> = vec![None];
    if names.len() > cfg.estimators.len() + 1 {
        specs.push(Some(EstimatorSpec::new(EstimatorKind::SampleMean)));
    }
    specs.extend(cfg.estimators.iter().cloned().map(Some));

    let tasks: Vec<(usize, usize)> = (0..cfg.values.len())
        .flat_map(|v| (0..cfg.runs).map(move |r| (v, r)))
        .collect();
    let results: Vec<TaskRows> = tasks
        .par_iter()
        .map(|&(vi, run)| {
            let value = cfg.values[vi];
            let start = Instant::now();
            let rows = run_task::<T>(cfg, &specs, vi, run);
            progress(&CellProgress {
                value,
                run,
                seconds: start.elapsed().as_secs_f64(),
                failures: rows.iter().filter(|r| r.is_err()).count(),
            });
            rows
        })
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (vi, &value) in cfg.values.iter().enumerate() {
        for (ei, name) in names.iter().enumerate() {
            let mut errs = Vec::new();
            let mut times = Vec::new();
            for run in 0..cfg.runs {
                match &results[vi * cfg.runs + run][ei] {
                    Ok((e, t)) => {
                        errs.push(*e);
                        times.push(*t);
                    }
                    Err(msg) => failures.push(CellFailure {
                        value,
                        estimator: name.clone(),
                        run,
                        message: msg.clone(),
                    }),
                }
            }
            let (mean_error, std_error) = mean_and_population_std(&errs);
            let (mean_runtime_s, _) = mean_and_population_std(&times);
            records.push(SweepRecord {
                sweep_var: cfg.sweep_variable.name().to_string(),
                value,
                estimator: name.clone(),
                mean_error,
                std_error,
                mean_runtime_s,
            });
        }
    }
    Ok(SweepResult { records, failures })
}

fn mean_and_population_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn make_dataset<T: Real>(cfg: &SweepConfig, cell: Cell, seed: u64) -> Result<TrialDataset<T>> {
    match &cfg.external {
        Some(ext) => mix_external(
            &ext.inliers.cast::<T>(),
            &ext.outliers.cast::<T>(),
            cell.eta,
            Some(cell.n),
            seed,
        ),
        None => {
            let noise = NoiseSpec::new(cfg.noise, cell.eta);
            assemble_trial(&cfg.inliers, &noise, cell.n, cell.d, seed, cfg.rotate)
        }
    }
}

fn run_task<T: Real>(
    cfg: &SweepConfig,
    specs: &[Option<EstimatorSpec>],
    vi: usize,
    run: usize,
) -> TaskRows {
    let cell = cfg.cell(cfg.values[vi]);
    let seed = trial_seed(cfg.base_seed, vi, run);
    let data = match make_dataset::<T>(cfg, cell, seed) {
        Ok(d) => d,
        Err(e) => {
            let msg = format!("data generation (seed {seed}): {e}");
            return specs.iter().map(|_| Err(msg.clone())).collect();
        }
    };
    specs
        .iter()
        .map(|spec| match spec {
            None => l2_error(&data.true_mean, &data.good_mean)
                .map(|e| (e, 0.0))
                .map_err(|e| e.to_string()),
            Some(spec) => {
                let spec = EstimatorSpec {
                    tau: cell.tau,
                    ..spec.clone()
                };
                let mut rng = ChaCha8Rng::seed_from_u64(estimator_seed(seed, &spec.name()));
                run_trial(&data, &spec, &mut rng)
                    .map(|o| (o.error, o.runtime_seconds))
                    .map_err(|e| e.to_string())
            }
        })
        .collect()
}
