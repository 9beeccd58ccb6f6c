//! Robust mean estimators and the heuristic wrappers around them.

mod classic;
mod filter;
mod lee_valiant;
mod lrv;
mod pgd;
mod que;
mod wrappers;

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use classic::{
    coord_median, coord_trimmed_mean, geometric_median, geometric_median_trace, median_of_means,
    median_of_means_ordered, sample_mean, WeiszfeldTrace, WEISZFELD_MAX_ITER, WEISZFELD_TOL,
};
pub use filter::{ev_filtering, fixed_prune, gaussian_tail_prune, randomized_prune, PruneOutcome};
pub use lee_valiant::{lee_valiant, lee_valiant_from};
pub use lrv::lrv;
pub use pgd::{pgd, pgd_gradient, pgd_objective};
pub use que::{que, que_scores};
pub use wrappers::{trace_scale, trace_scaled};

use crate::error::{invalid, Result};
use crate::numerics::Matrix;
use crate::scalar::Real;
use crate::thresholds::{ThresholdMode, ThresholdSampleCount, DEFAULT_T};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    SampleMean,
    CoordMedian,
    CoordTrimmedMean,
    MedianOfMeans,
    GeometricMedian,
    LeeValiant,
    LeeValiantSimple,
    Lrv,
    EvFiltering,
    Que,
    Pgd,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 11] = [
        EstimatorKind::SampleMean,
        EstimatorKind::CoordMedian,
        EstimatorKind::CoordTrimmedMean,
        EstimatorKind::MedianOfMeans,
        EstimatorKind::GeometricMedian,
        EstimatorKind::LeeValiant,
        EstimatorKind::LeeValiantSimple,
        EstimatorKind::Lrv,
        EstimatorKind::EvFiltering,
        EstimatorKind::Que,
        EstimatorKind::Pgd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::SampleMean => "sample_mean",
            EstimatorKind::CoordMedian => "coord_median",
            EstimatorKind::CoordTrimmedMean => "coord_trimmed_mean",
            EstimatorKind::MedianOfMeans => "median_of_means",
            EstimatorKind::GeometricMedian => "geometric_median",
            EstimatorKind::LeeValiant => "lee_valiant",
            EstimatorKind::LeeValiantSimple => "lee_valiant_simple",
            EstimatorKind::Lrv => "lrv",
            EstimatorKind::EvFiltering => "ev_filtering",
            EstimatorKind::Que => "que",
            EstimatorKind::Pgd => "pgd",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let s = s.to_ascii_lowercase();
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Whether the estimator compares a spectral norm against a threshold.
    pub fn uses_threshold(self) -> bool {
        matches!(self, EstimatorKind::EvFiltering | EstimatorKind::Que)
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How `ev_filtering` chooses points along the top eigenvector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruningRule {
    #[default]
    GaussianTail,
    Randomized,
    Fixed,
}

/// Point weights used by `lrv`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightingRule {
    #[default]
    Gaussian,
    General,
}

/// Estimator used by `lee_valiant` on its initial subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialEstimator {
    #[default]
    MedianOfMeans,
    SampleMean,
    CoordMedian,
    GeometricMedian,
    Lrv,
    EvFiltering,
}

impl InitialEstimator {
    pub fn kind(self) -> EstimatorKind {
        match self {
            InitialEstimator::MedianOfMeans => EstimatorKind::MedianOfMeans,
            InitialEstimator::SampleMean => EstimatorKind::SampleMean,
            InitialEstimator::CoordMedian => EstimatorKind::CoordMedian,
            InitialEstimator::GeometricMedian => EstimatorKind::GeometricMedian,
            InitialEstimator::Lrv => EstimatorKind::Lrv,
            InitialEstimator::EvFiltering => EstimatorKind::EvFiltering,
        }
    }
}

/// An estimator together with every hyperparameter it may consult.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorSpec {
    pub kind: EstimatorKind,
    /// Expected corruption fraction.
    pub tau: f64,
    /// Chunk count for `median_of_means`.
    pub k: usize,
    /// Weight scale for `lrv`.
    pub c: f64,
    /// Entropy scale for `que`.
    pub alpha: f64,
    /// Slack multiplier in the Gaussian-tail pruning rule.
    pub gamma_slack: f64,
    /// Iteration count for `pgd`.
    pub gamma_iters: usize,
    /// Fraction of points used for the `lee_valiant` initial estimate.
    pub gamma_frac: f64,
    /// Threshold confidence.
    pub t: f64,
    pub threshold_mode: ThresholdMode,
    pub threshold_count: ThresholdSampleCount,
    pub pruning_rule: PruningRule,
    pub weighting_rule: WeightingRule,
    pub initial: InitialEstimator,
    pub early_halting: bool,
    pub trace_scaling: bool,
    /// Display name override.
    pub label: Option<String>,
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        Self {
            kind: EstimatorKind::SampleMean,
            tau: 0.1,
            k: 10,
            c: 1.0,
            alpha: 4.0,
            gamma_slack: 5.0,
            gamma_iters: 15,
            gamma_frac: 0.5,
            t: DEFAULT_T,
            threshold_mode: ThresholdMode::LowN,
            threshold_count: ThresholdSampleCount::Shrinking,
            pruning_rule: PruningRule::GaussianTail,
            weighting_rule: WeightingRule::Gaussian,
            initial: InitialEstimator::MedianOfMeans,
            early_halting: false,
            trace_scaling: false,
            label: None,
        }
    }
}

impl EstimatorSpec {
    pub fn new(kind: EstimatorKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn with_threshold(mut self, mode: ThresholdMode) -> Self {
        self.threshold_mode = mode;
        self
    }

    /// Parse names such as `que_low_n`, `ev_filtering_legacy`, `pgd` or
    /// `que_low_n+trace+halt`.
    pub fn from_name(name: &str) -> Result<Self> {
        let mut parts = name.trim().split('+');
        let base = parts.next().unwrap_or("").trim().to_ascii_lowercase();
        let (stem, mode) = if let Some(s) = base.strip_suffix("_low_n") {
            (s, Some(ThresholdMode::LowN))
        } else if let Some(s) = base.strip_suffix("_legacy") {
            (s, Some(ThresholdMode::Legacy))
        } else {
            (base.as_str(), None)
        };
        let kind = EstimatorKind::parse(stem).ok_or_else(|| unknown_estimator(name))?;
        let mut spec = Self::new(kind);
        if let Some(mode) = mode {
            if !kind.uses_threshold() {
                return Err(unknown_estimator(name));
            }
            spec.threshold_mode = mode;
        }
        for flag in parts {
            match flag.trim() {
                "trace" => spec.trace_scaling = true,
                "halt" => spec.early_halting = true,
                other => {
                    return Err(invalid(format!(
                        "unknown estimator modifier '{other}' in '{name}' (expected trace or halt)"
                    )))
                }
            }
        }
        Ok(spec)
    }

    /// Every base name accepted by [`EstimatorSpec::from_name`].
    pub fn valid_names() -> Vec<String> {
        let mut out = Vec::new();
        for k in EstimatorKind::ALL {
            out.push(k.name().to_string());
            if k.uses_threshold() {
                out.push(format!("{}_low_n", k.name()));
                out.push(format!("{}_legacy", k.name()));
            }
        }
        out
    }

    /// Name used in reports: the label if set, otherwise the canonical name.
    pub fn name(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        let mut s = self.kind.name().to_string();
        if self.kind.uses_threshold() {
            s.push('_');
            s.push_str(self.threshold_mode.name());
        }
        if self.trace_scaling {
            s.push_str("+trace");
        }
        if self.early_halting {
            s.push_str("+halt");
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.tau >= 0.0 && self.tau < 0.5) {
            bad.push(format!("tau must lie in [0, 0.5), got {}", self.tau));
        }
        if self.k < 1 {
            bad.push("k must be at least 1".to_string());
        }
        if !(self.c > 0.0) {
            bad.push(format!("c must be positive, got {}", self.c));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            bad.push(format!(
                "alpha must be finite and non-negative, got {}",
                self.alpha
            ));
        }
        if !(self.gamma_slack > 0.0) {
            bad.push(format!(
                "gamma_slack must be positive, got {}",
                self.gamma_slack
            ));
        }
        if self.gamma_iters < 1 {
            bad.push("gamma_iters must be at least 1".to_string());
        }
        if !(self.gamma_frac > 0.0 && self.gamma_frac < 1.0) {
            bad.push(format!(
                "gamma_frac must lie in (0, 1), got {}",
                self.gamma_frac
            ));
        }
        if !(self.t > 0.0) {
            bad.push(format!("t must be positive, got {}", self.t));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(invalid(bad.join("; ")))
        }
    }
}

fn unknown_estimator(name: &str) -> crate::error::Error {
    invalid(format!(
        "unknown estimator '{name}'; valid names: {}",
        EstimatorSpec::valid_names().join(", ")
    ))
}

/// Conditions worth surfacing alongside an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFlag {
    /// A pruning step would have removed every survivor.
    AllPruned,
    /// A pruning step removed nothing while the threshold was still exceeded.
    PruneStalled,
    /// `dτ ≤ 0.1`, so the log slack term of the tail rule was dropped.
    SlackClamped,
    /// `lee_valiant` had no points left after pruning and returned `μ′`.
    InitialEstimateFallback,
    /// Trace scaling saw a zero trace and returned the common point.
    ZeroTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport<T> {
    pub mean: Vec<T>,
    pub pruned_count: usize,
    pub iterations: usize,
    pub halted_early: bool,
    pub final_top_eigenvalue: f64,
    pub flags: Vec<ReportFlag>,
}

impl<T: Real> EstimateReport<T> {
    pub fn plain(mean: Vec<T>) -> Self {
        Self {
            mean,
            pruned_count: 0,
            iterations: 0,
            halted_early: false,
            final_top_eigenvalue: 0.0,
            flags: Vec::new(),
        }
    }

    pub(crate) fn flag(&mut self, f: ReportFlag) {
        if !self.flags.contains(&f) {
            self.flags.push(f);
        }
    }
}

/// Run `spec` on the samples in `x`.
pub fn estimate<T: Real, R: Rng + ?Sized>(
    x: &Matrix<T>,
    spec: &EstimatorSpec,
    rng: &mut R,
) -> Result<EstimateReport<T>> {
    spec.validate()?;
    x.check_samples()?;
    if spec.trace_scaling {
        let inner = EstimatorSpec {
            trace_scaling: false,
            ..spec.clone()
        };
        return trace_scaled(x, |xs, r| estimate_unscaled(xs, &inner, r), rng);
    }
    estimate_unscaled(x, spec, rng)
}

fn estimate_unscaled<T: Real, R: Rng + ?Sized>(
    x: &Matrix<T>,
    spec: &EstimatorSpec,
    rng: &mut R,
) -> Result<EstimateReport<T>> {
    let plain = |m: Vec<T>| Ok(EstimateReport::plain(m));
    match spec.kind {
        EstimatorKind::SampleMean => plain(sample_mean(x)),
        EstimatorKind::CoordMedian => plain(coord_median(x)),
        EstimatorKind::CoordTrimmedMean => plain(coord_trimmed_mean(x, spec.tau)?),
        EstimatorKind::MedianOfMeans => plain(median_of_means(x, spec.k, rng)),
        EstimatorKind::GeometricMedian => {
            plain(geometric_median(x, WEISZFELD_TOL, WEISZFELD_MAX_ITER))
        }
        EstimatorKind::LeeValiant => lee_valiant(x, spec, false, rng),
        EstimatorKind::LeeValiantSimple => lee_valiant(x, spec, true, rng),
        EstimatorKind::Lrv => plain(lrv(x, spec.tau, spec.c, spec.weighting_rule)?),
        EstimatorKind::EvFiltering => ev_filtering(x, spec, rng),
        EstimatorKind::Que => que(x, spec, rng),
        EstimatorKind::Pgd => pgd(x, spec, rng),
    }
}
