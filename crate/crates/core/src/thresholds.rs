//! Spectral-norm thresholds for the `1/n` sample covariance of a clean
//! identity-covariance Gaussian sample.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Default confidence parameter `t`.
pub const DEFAULT_T: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdParams {
    /// Current (surviving) sample count.
    pub n: usize,
    pub d: usize,
    pub t: f64,
    pub tau: f64,
}

impl ThresholdParams {
    pub fn new(n: usize, d: usize, t: f64, tau: f64) -> Self {
        Self { n, d, t, tau }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(invalid(format!("threshold needs n >= 2, got {}", self.n)));
        }
        if !(self.t > 0.0) {
            return Err(invalid(format!("threshold needs t > 0, got {}", self.t)));
        }
        if !(self.tau > 0.0 && self.tau < 0.5) {
            return Err(invalid(format!(
                "threshold needs 0 < tau < 0.5, got {}",
                self.tau
            )));
        }
        Ok(())
    }
}

/// `(1 + √(d/n) + t/√n)²`.
pub fn low_n_threshold(p: &ThresholdParams) -> f64 {
    let n = p.n as f64;
    let d = p.d as f64;
    (1.0 + (d / n).sqrt() + p.t / n.sqrt()).powi(2)
}

/// `(1 + √(d/n) + t/√n + √(d + √(2d)·t + t²)/n)²`.
pub fn theorem1_bound(p: &ThresholdParams) -> f64 {
    let n = p.n as f64;
    let d = p.d as f64;
    let tail = (d + (2.0 * d).sqrt() * p.t + p.t * p.t).sqrt() / n;
    (1.0 + (d / n).sqrt() + p.t / n.sqrt() + tail).powi(2)
}

/// `1 + 3τ ln(1/τ)`; equals 1 at `τ = 0`.
pub fn legacy_threshold(tau: f64) -> f64 {
    if tau <= 0.0 {
        return 1.0;
    }
    1.0 + 3.0 * tau * (1.0 / tau).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    Legacy,
    #[default]
    LowN,
}

impl ThresholdMode {
    pub fn name(self) -> &'static str {
        match self {
            ThresholdMode::Legacy => "legacy",
            ThresholdMode::LowN => "low_n",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "legacy" => Some(ThresholdMode::Legacy),
            "low_n" => Some(ThresholdMode::LowN),
            _ => None,
        }
    }
}

/// Which sample count feeds the threshold while points are being pruned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdSampleCount {
    /// Recompute with the number of surviving points each round.
    #[default]
    Shrinking,
    /// Keep the original `n`.
    Fixed,
}

/// Threshold evaluated for a filter round with `n_current` survivors out of an
/// original `n0`.
pub fn threshold_value(
    mode: ThresholdMode,
    count: ThresholdSampleCount,
    n_current: usize,
    n0: usize,
    d: usize,
    t: f64,
    tau: f64,
) -> f64 {
    match mode {
        ThresholdMode::Legacy => legacy_threshold(tau),
        ThresholdMode::LowN => {
            let n = match count {
                ThresholdSampleCount::Shrinking => n_current,
                ThresholdSampleCount::Fixed => n0,
            };
            low_n_threshold(&ThresholdParams::new(n.max(1), d, t, tau))
        }
    }
}
