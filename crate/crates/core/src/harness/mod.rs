//! Error metrics, seeded parameter sweeps and result files.

mod output;
mod sweep;

pub use output::{emit_csv, emit_json, format_g6, read_csv, write_csv, CSV_HEADER};
pub use sweep::{
    run_sweep, run_sweep_with_progress, trial_seed, CellFailure, CellProgress, ExternalData,
    SweepConfig, SweepRecord, SweepResult, SweepVariable, GOOD_SAMPLE_MEAN,
};

use std::time::Instant;

use rand::Rng;
use serde::Serialize;

use crate::datagen::TrialDataset;
use crate::error::{invalid, Error, Result};
use crate::estimators::{estimate, EstimateReport, EstimatorSpec};
use crate::numerics::Matrix;
use crate::scalar::Real;

/// `‖μ − μ̂‖₂`.
pub fn l2_error<T: Real>(mu: &[T], mu_hat: &[T]) -> Result<f64> {
    if mu.len() != mu_hat.len() {
        return Err(Error::DimensionMismatch {
            expected: mu.len(),
            got: mu_hat.len(),
        });
    }
    Ok(mu
        .iter()
        .zip(mu_hat)
        .map(|(&a, &b)| {
            let d = (a - b).f64();
            d * d
        })
        .sum::<f64>()
        .sqrt())
}

/// Leave-one-out error averaged over the smallest `⌊0.9n⌋` folds.
pub fn loocv_error<T: Real, R: Rng + ?Sized>(
    x: &Matrix<T>,
    spec: &EstimatorSpec,
    rng: &mut R,
) -> Result<f64> {
    let n = x.rows();
    if n < 3 {
        return Err(invalid(format!("loocv needs n >= 3, got {n}")));
    }
    let mut errors = Vec::with_capacity(n);
    for i in 0..n {
        let rest: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        let fold = x.select_rows(&rest);
        let est = estimate(&fold, spec, rng).map_err(|e| e.context(format!("fold {i}")))?;
        errors.push(l2_error(x.row(i), &est.mean)?);
    }
    errors.sort_by(|a, b| a.partial_cmp(b).expect("finite fold errors"));
    let keep = (0.9 * n as f64).floor() as usize;
    Ok(errors[..keep].iter().sum::<f64>() / keep as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialOutcome<T> {
    pub error: f64,
    pub runtime_seconds: f64,
    pub report: EstimateReport<T>,
}

/// Apply `spec` to `dataset.data` and score against `dataset.true_mean`.
/// Runtime covers the estimator call only.
pub fn run_trial<T: Real, R: Rng + ?Sized>(
    dataset: &TrialDataset<T>,
    spec: &EstimatorSpec,
    rng: &mut R,
) -> Result<TrialOutcome<T>> {
    let start = Instant::now();
    let report = estimate(&dataset.data, spec, rng).map_err(|e| {
        e.context(format!(
            "{} on trial seed {}",
            spec.name(),
            dataset.rng_seed
        ))
    })?;
    let runtime_seconds = start.elapsed().as_secs_f64();
    Ok(TrialOutcome {
        error: l2_error(&dataset.true_mean, &report.mean)?,
        runtime_seconds,
        report,
    })
}

/// Mean of the uncorrupted sample.
pub fn good_sample_mean<T: Real>(dataset: &TrialDataset<T>) -> Vec<T> {
    dataset.good_mean.clone()
}
