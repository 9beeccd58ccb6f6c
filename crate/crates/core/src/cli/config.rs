//! Bench configuration files.
//!
//! A config is a flat TOML or JSON document (picked by file extension) whose
//! keys name [`SweepConfig`] fields. Omitted keys keep the defaults of
//! [`SweepConfig::default`].

use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use super::matrix_io::read_matrix_csv;
use crate::datagen::{InlierKind, InlierSpec, NoiseKind, SubtleKind};
use crate::error::{invalid, Error, Result};
use crate::estimators::{EstimatorSpec, InitialEstimator, PruningRule, WeightingRule};
use crate::harness::{ExternalData, SweepConfig, SweepVariable};
use crate::thresholds::{ThresholdMode, ThresholdSampleCount};

const TOP_KEYS: &[&str] = &[
    "sweep_variable",
    "values",
    "n",
    "d",
    "eta",
    "tau",
    "runs",
    "base_seed",
    "rotate",
    "inliers",
    "noise",
    "estimators",
    "inlier_csv",
    "outlier_csv",
    "out",
    "json",
    // flat inlier / noise parameters
    "sigma",
    "top_variance",
    "nu",
    "scale",
    "rate",
    "mean_fill",
    "angle_deg",
    "subtle",
];

const INLIER_PARAMS: &[&str] = &["sigma", "top_variance", "nu", "scale", "rate", "mean_fill"];
const NOISE_PARAMS: &[&str] = &["angle_deg", "subtle"];

pub(crate) const ESTIMATOR_KEYS: &[&str] = &[
    "name",
    "label",
    "tau",
    "k",
    "c",
    "alpha",
    "gamma_slack",
    "gamma_iters",
    "gamma_frac",
    "t",
    "threshold_mode",
    "threshold_count",
    "pruning_rule",
    "weighting_rule",
    "initial",
    "early_halting",
    "trace_scaling",
];

/// A parsed bench config.
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub sweep: SweepConfig,
    /// CSV output path, resolved against the config's directory.
    pub out: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

/// Read a config, choosing the parser from the extension (`.json` is JSON,
/// anything else TOML).
pub fn load_config(path: &Path) -> Result<BenchConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let is_json = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("json"))
        .unwrap_or(false);
    let value = if is_json {
        serde_json::from_str::<Value>(&text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?
    } else {
        let t: toml::Table = toml::from_str(&text).map_err(|e| Error::Parse {
            line: e
                .span()
                .map(|s| text[..s.start].matches('\n').count() + 1)
                .unwrap_or(0),
            message: e.message().to_string(),
        })?;
        serde_json::to_value(t).map_err(|e| invalid(e.to_string()))?
    };
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    config_from_value(&value, base).map_err(|e| e.context(path.display().to_string()))
}

/// Build a config from a parsed document; relative paths resolve against
/// `base_dir`.
pub fn config_from_value(value: &Value, base_dir: &Path) -> Result<BenchConfig> {
    let obj = value
        .as_object()
        .ok_or_else(|| invalid("config must be a table of keys"))?;
    let mut f = Fields::default();
    for key in obj.keys() {
        if !TOP_KEYS.contains(&key.as_str()) {
            f.bad(key, "unknown key");
        }
    }
    let mut cfg = SweepConfig::default();
    if let Some(v) = obj.get("sweep_variable") {
        match v.as_str().and_then(SweepVariable::parse) {
            Some(s) => cfg.sweep_variable = s,
            None => f.bad("sweep_variable", "expected one of n, d, eta, tau"),
        }
    }
    if let Some(v) = obj.get("values") {
        match v.as_array() {
            Some(a) => {
                let mut vals = Vec::new();
                for (i, x) in a.iter().enumerate() {
                    match x.as_f64() {
                        Some(x) => vals.push(x),
                        None => f.bad(&format!("values[{i}]"), "expected a number"),
                    }
                }
                cfg.values = vals;
            }
            None => f.bad("values", "expected an array of numbers"),
        }
    }
    f.usize(obj, "n", &mut cfg.n);
    f.usize(obj, "d", &mut cfg.d);
    f.f64(obj, "eta", &mut cfg.eta);
    if obj.contains_key("tau") {
        let mut t = 0.0;
        f.f64(obj, "tau", &mut t);
        cfg.tau = Some(t);
    }
    f.usize(obj, "runs", &mut cfg.runs);
    f.u64(obj, "base_seed", &mut cfg.base_seed);
    f.bool(obj, "rotate", &mut cfg.rotate);

    if let Some(kind) = inliers(obj, &mut f) {
        cfg.inliers = kind;
    }
    if let Some(kind) = noise(obj, &mut f) {
        cfg.noise = kind;
    }

    match obj.get("estimators") {
        Some(Value::Array(a)) => {
            for (i, e) in a.iter().enumerate() {
                let at = format!("estimators[{i}]");
                let spec = match e {
                    Value::String(s) => EstimatorSpec::from_name(s).map_err(message),
                    Value::Object(m) => estimator_from_map(m, false),
                    _ => Err("expected a name or a table".to_string()),
                };
                match spec {
                    Ok(s) => cfg.estimators.push(s),
                    Err(msg) => f.bad(&at, &msg),
                }
            }
        }
        Some(Value::String(s)) => match EstimatorSpec::from_name(s) {
            Ok(spec) => cfg.estimators.push(spec),
            Err(e) => f.bad("estimators", &message(e)),
        },
        Some(_) => f.bad("estimators", "expected an array"),
        None => f.bad("estimators", "missing"),
    }

    let path = |f: &mut Fields, key: &str| -> Option<PathBuf> {
        match obj.get(key) {
            None => None,
            Some(Value::String(s)) => Some(base_dir.join(s)),
            Some(_) => {
                f.bad(key, "expected a path string");
                None
            }
        }
    };
    let out = path(&mut f, "out");
    let json = path(&mut f, "json");
    let inlier_csv = path(&mut f, "inlier_csv");
    let outlier_csv = path(&mut f, "outlier_csv");
    match (inlier_csv, outlier_csv) {
        (Some(ip), Some(op)) => {
            let inl = read_matrix_csv::<f64>(&ip);
            let outl = read_matrix_csv::<f64>(&op);
            match (inl, outl) {
                (Ok(inliers), Ok(outliers)) => {
                    if !obj.contains_key("n") {
                        cfg.n = inliers.rows();
                    }
                    cfg.d = inliers.cols();
                    cfg.external = Some(ExternalData { inliers, outliers });
                }
                (i, o) => {
                    if let Err(e) = i {
                        f.bad("inlier_csv", &e.to_string());
                    }
                    if let Err(e) = o {
                        f.bad("outlier_csv", &e.to_string());
                    }
                }
            }
        }
        (None, None) => {}
        _ => f.bad(
            "inlier_csv",
            "inlier_csv and outlier_csv must be given together",
        ),
    }

    if f.errors.is_empty() {
        if let Err(e) = cfg.validate() {
            f.errors.push(message(e));
        }
    }
    f.finish()?;
    Ok(BenchConfig {
        sweep: cfg,
        out,
        json,
    })
}

fn inliers(obj: &Map<String, Value>, f: &mut Fields) -> Option<InlierSpec> {
    let (name, params) = match obj.get("inliers") {
        None => ("gaussian_identity".to_string(), obj),
        Some(Value::String(s)) => (s.clone(), obj),
        Some(Value::Object(m)) => {
            for k in m.keys() {
                if k != "kind" && !INLIER_PARAMS.contains(&k.as_str()) {
                    f.bad(&format!("inliers.{k}"), "unknown key");
                }
            }
            match m.get("kind").and_then(Value::as_str) {
                Some(s) => (s.to_string(), m),
                None => {
                    f.bad("inliers.kind", "missing inlier kind");
                    return None;
                }
            }
        }
        Some(_) => {
            f.bad("inliers", "expected a kind name or a table");
            return None;
        }
    };
    let mut p = |key: &str, default: f64| {
        let mut v = default;
        f.f64(params, key, &mut v);
        v
    };
    let kind = match name.as_str() {
        "gaussian_identity" => InlierKind::GaussianIdentity,
        "gaussian_spherical" => InlierKind::GaussianSpherical {
            sigma: p("sigma", 1.0),
        },
        "gaussian_diag" => InlierKind::GaussianDiag {
            top_variance: p("top_variance", 5.0),
        },
        "multivariate_t" => InlierKind::MultivariateT { nu: p("nu", 3.0) },
        "laplace" => InlierKind::Laplace {
            scale: p("scale", 1.0),
        },
        "poisson" => InlierKind::Poisson {
            rate: p("rate", 5.0),
        },
        "gaussian_mixture3" | "gaussian_mixture_3" => InlierKind::GaussianMixture3,
        other => {
            f.bad(
                "inliers",
                &format!(
                    "unknown inlier kind '{other}' (expected gaussian_identity, \
                     gaussian_spherical, gaussian_diag, multivariate_t, laplace, poisson, \
                     gaussian_mixture3)"
                ),
            );
            return None;
        }
    };
    let mut spec = InlierSpec::new(kind);
    f.f64(params, "mean_fill", &mut spec.mean_fill);
    Some(spec)
}

fn noise(obj: &Map<String, Value>, f: &mut Fields) -> Option<NoiseKind> {
    let (name, params) = match obj.get("noise") {
        None => return None,
        Some(Value::String(s)) => (s.clone(), obj),
        Some(Value::Object(m)) => {
            for k in m.keys() {
                if k != "kind" && !NOISE_PARAMS.contains(&k.as_str()) {
                    f.bad(&format!("noise.{k}"), "unknown key");
                }
            }
            match m.get("kind").and_then(Value::as_str) {
                Some(s) => (s.to_string(), m),
                None => {
                    f.bad("noise.kind", "missing noise kind");
                    return None;
                }
            }
        }
        Some(_) => {
            f.bad("noise", "expected a kind name or a table");
            return None;
        }
    };
    let subtle = |f: &mut Fields, default: SubtleKind| match params.get("subtle") {
        None => Some(default),
        Some(v) => match v.as_str() {
            Some("variance_shell") => Some(SubtleKind::VarianceShell),
            Some("dkk") => Some(SubtleKind::Dkk),
            _ => {
                f.bad("subtle", "expected variance_shell or dkk");
                None
            }
        },
    };
    Some(match name.as_str() {
        "variance_shell" => NoiseKind::VarianceShell,
        "two_clusters" => {
            let mut angle_deg = 75.0;
            f.f64(params, "angle_deg", &mut angle_deg);
            NoiseKind::TwoClusters { angle_deg }
        }
        "dkk" => NoiseKind::Dkk,
        "uniform_in_dist" => NoiseKind::UniformInDist,
        "large_outliers" => NoiseKind::LargeOutliers,
        "mix" => NoiseKind::Mix {
            subtle: subtle(f, SubtleKind::VarianceShell)?,
        },
        "mix_variance_shell" => NoiseKind::Mix {
            subtle: SubtleKind::VarianceShell,
        },
        "mix_dkk" => NoiseKind::Mix {
            subtle: SubtleKind::Dkk,
        },
        "subtractive" => NoiseKind::Subtractive,
        other => {
            f.bad(
                "noise",
                &format!(
                    "unknown noise kind '{other}' (expected variance_shell, two_clusters, \
                     dkk, uniform_in_dist, large_outliers, mix, mix_variance_shell, mix_dkk, \
                     subtractive)"
                ),
            );
            return None;
        }
    })
}

/// Estimator from a table of [`EstimatorSpec`] fields keyed by name. Every
/// problem is reported, joined by `; `.
pub(crate) fn estimator_from_map(
    m: &Map<String, Value>,
    allow_tau: bool,
) -> std::result::Result<EstimatorSpec, String> {
    let mut f = Fields::default();
    for k in m.keys() {
        if !ESTIMATOR_KEYS.contains(&k.as_str()) {
            f.bad(k, "unknown key");
        } else if k == "tau" && !allow_tau {
            f.bad(k, "set tau at the top level, it applies to every estimator");
        }
    }
    let Some(name) = m.get("name").and_then(Value::as_str) else {
        f.bad("name", "missing estimator name");
        return Err(f.errors.join("; "));
    };
    let mut spec = match EstimatorSpec::from_name(name) {
        Ok(s) => s,
        Err(e) => {
            f.errors.push(message(e));
            return Err(f.errors.join("; "));
        }
    };
    if let Some(v) = m.get("label") {
        match v.as_str() {
            Some(s) => spec.label = Some(s.to_string()),
            None => f.bad("label", "expected a string"),
        }
    }
    f.f64(m, "tau", &mut spec.tau);
    f.usize(m, "k", &mut spec.k);
    f.f64(m, "c", &mut spec.c);
    f.f64(m, "alpha", &mut spec.alpha);
    f.f64(m, "gamma_slack", &mut spec.gamma_slack);
    f.usize(m, "gamma_iters", &mut spec.gamma_iters);
    f.f64(m, "gamma_frac", &mut spec.gamma_frac);
    f.f64(m, "t", &mut spec.t);
    f.bool(m, "early_halting", &mut spec.early_halting);
    f.bool(m, "trace_scaling", &mut spec.trace_scaling);
    f.choice(
        m,
        "threshold_mode",
        &mut spec.threshold_mode,
        ThresholdMode::parse,
    );
    f.choice(
        m,
        "threshold_count",
        &mut spec.threshold_count,
        |s| match s {
            "shrinking" => Some(ThresholdSampleCount::Shrinking),
            "fixed" => Some(ThresholdSampleCount::Fixed),
            _ => None,
        },
    );
    f.choice(
        m,
        "pruning_rule",
        &mut spec.pruning_rule,
        parse_pruning_rule,
    );
    f.choice(
        m,
        "weighting_rule",
        &mut spec.weighting_rule,
        parse_weighting_rule,
    );
    f.choice(m, "initial", &mut spec.initial, parse_initial);
    if f.errors.is_empty() {
        if let Err(e) = spec.validate() {
            f.errors.push(message(e));
        }
    }
    if f.errors.is_empty() {
        Ok(spec)
    } else {
        Err(f.errors.join("; "))
    }
}

pub(crate) fn parse_pruning_rule(s: &str) -> Option<PruningRule> {
    match s {
        "gaussian_tail" => Some(PruningRule::GaussianTail),
        "randomized" => Some(PruningRule::Randomized),
        "fixed" => Some(PruningRule::Fixed),
        _ => None,
    }
}

pub(crate) fn parse_weighting_rule(s: &str) -> Option<WeightingRule> {
    match s {
        "gaussian" => Some(WeightingRule::Gaussian),
        "general" => Some(WeightingRule::General),
        _ => None,
    }
}

pub(crate) fn parse_initial(s: &str) -> Option<InitialEstimator> {
    match s {
        "median_of_means" => Some(InitialEstimator::MedianOfMeans),
        "sample_mean" => Some(InitialEstimator::SampleMean),
        "coord_median" => Some(InitialEstimator::CoordMedian),
        "geometric_median" => Some(InitialEstimator::GeometricMedian),
        "lrv" => Some(InitialEstimator::Lrv),
        "ev_filtering" => Some(InitialEstimator::EvFiltering),
        _ => None,
    }
}

/// Error text without the variant prefix, for nesting in a list.
fn message(e: Error) -> String {
    match e {
        Error::InvalidInput(s) => s,
        other => other.to_string(),
    }
}

#[derive(Default)]
struct Fields {
    errors: Vec<String>,
}

impl Fields {
    fn bad(&mut self, key: &str, msg: &str) {
        self.errors.push(format!("{key}: {msg}"));
    }

    fn f64(&mut self, m: &Map<String, Value>, key: &str, dst: &mut f64) {
        if let Some(v) = m.get(key) {
            match v.as_f64() {
                Some(x) => *dst = x,
                None => self.bad(key, "expected a number"),
            }
        }
    }

    fn u64(&mut self, m: &Map<String, Value>, key: &str, dst: &mut u64) {
        if let Some(v) = m.get(key) {
            match v.as_u64() {
                Some(x) => *dst = x,
                None => self.bad(key, "expected a non-negative integer"),
            }
        }
    }

    fn usize(&mut self, m: &Map<String, Value>, key: &str, dst: &mut usize) {
        let mut x = *dst as u64;
        let before = self.errors.len();
        self.u64(m, key, &mut x);
        if self.errors.len() == before {
            *dst = x as usize;
        }
    }

    fn bool(&mut self, m: &Map<String, Value>, key: &str, dst: &mut bool) {
        if let Some(v) = m.get(key) {
            match v.as_bool() {
                Some(x) => *dst = x,
                None => self.bad(key, "expected true or false"),
            }
        }
    }

    fn choice<C>(
        &mut self,
        m: &Map<String, Value>,
        key: &str,
        dst: &mut C,
        parse: impl Fn(&str) -> Option<C>,
    ) {
        if let Some(v) = m.get(key) {
            match v.as_str().and_then(&parse) {
                Some(c) => *dst = c,
                None => self.bad(key, &format!("unrecognised value {v}")),
            }
        }
    }

    fn finish(self) -> Result<()> {
        if self.errors.is_empty() {
            Ok(())
        } else {
            Err(invalid(format!(
                "{} config error(s): {}",
                self.errors.len(),
                self.errors.join("; ")
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::EstimatorKind;
    use serde_json::json;

    #[test]
    fn defaults_fill_omitted_keys() {
        let c = config_from_value(&json!({"estimators": ["sample_mean"]}), Path::new(".")).unwrap();
        assert_eq!(c.sweep.n, 500);
        assert_eq!(c.sweep.runs, 5);
        assert_eq!(c.sweep.estimators[0].kind, EstimatorKind::SampleMean);
    }

    #[test]
    fn every_bad_field_is_listed() {
        let err = config_from_value(
            &json!({"n": -3, "runs": "five", "bogus": 1, "estimators": ["nope"]}),
            Path::new("."),
        )
        .unwrap_err()
        .to_string();
        for needle in [
            "n:",
            "runs:",
            "bogus: unknown key",
            "unknown estimator 'nope'",
            "que_low_n",
        ] {
            assert!(err.contains(needle), "{needle} missing from {err}");
        }
    }

    #[test]
    fn estimator_tables_and_flat_params() {
        let c = config_from_value(
            &json!({
                "inliers": "gaussian_spherical", "sigma": 2.0,
                "noise": {"kind": "two_clusters", "angle_deg": 30.0},
                "estimators": [{"name": "que_legacy", "early_halting": true, "alpha": 2.0}]
            }),
            Path::new("."),
        )
        .unwrap();
        assert_eq!(
            c.sweep.inliers.kind,
            InlierKind::GaussianSpherical { sigma: 2.0 }
        );
        assert_eq!(c.sweep.noise, NoiseKind::TwoClusters { angle_deg: 30.0 });
        let e = &c.sweep.estimators[0];
        assert_eq!(e.threshold_mode, ThresholdMode::Legacy);
        assert!(e.early_halting);
        assert_eq!(e.alpha, 2.0);
        assert_eq!(e.name(), "que_legacy+halt");
    }
}
