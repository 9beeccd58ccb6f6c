use rand::Rng;

use super::{EstimateReport, EstimatorSpec, PruningRule, ReportFlag};
use crate::error::Result;
use crate::numerics::{centered, column_mean, erfc, median, top_scatter_eigenpair, Matrix};
use crate::scalar::Real;
use crate::thresholds::threshold_value;

/// One filter round: the spectral statistic, then (if asked) a prune.
pub(crate) trait FilterStep<T: Real> {
    /// Top eigenvalue of the `1/n` covariance of the centered survivors `y`.
    fn top_eigenvalue<R: Rng + ?Sized>(&mut self, y: &Matrix<T>, rng: &mut R) -> Result<T>;

    /// Local indices (into `y`) that survive.
    fn prune<R: Rng + ?Sized>(
        &mut self,
        y: &Matrix<T>,
        report: &mut EstimateReport<T>,
        rng: &mut R,
    ) -> Result<Vec<usize>>;
}

/// Threshold-then-prune loop shared by `ev_filtering` and `que`.
pub(crate) fn filter_loop<T: Real, S: FilterStep<T>, R: Rng + ?Sized>(
    x: &Matrix<T>,
    spec: &EstimatorSpec,
    step: &mut S,
    rng: &mut R,
) -> Result<EstimateReport<T>> {
    let (n0, d) = x.shape();
    let mut survivors: Vec<usize> = (0..n0).collect();
    let mut report = EstimateReport::plain(Vec::new());
    loop {
        let n = survivors.len();
        report.pruned_count = n0 - n;
        let sub = x.select_rows(&survivors);
        let mean = column_mean(&sub);
        if n < 2 {
            report.final_top_eigenvalue = 0.0;
            report.mean = mean;
            return Ok(report);
        }
        let y = centered(&sub, &mean);
        let lambda = step.top_eigenvalue(&y, rng)?;
        report.final_top_eigenvalue = lambda.f64();
        let thr = threshold_value(
            spec.threshold_mode,
            spec.threshold_count,
            n,
            n0,
            d,
            spec.t,
            spec.tau,
        );
        if lambda.f64() <= thr {
            report.mean = mean;
            return Ok(report);
        }
        if spec.early_halting && (n0 - n) as f64 > 2.0 * spec.tau * n0 as f64 {
            report.halted_early = true;
            report.mean = mean;
            return Ok(report);
        }
        let kept = step.prune(&y, &mut report, rng)?;
        if kept.is_empty() {
            report.flag(ReportFlag::AllPruned);
            report.mean = mean;
            return Ok(report);
        }
        if kept.len() == n {
            report.flag(ReportFlag::PruneStalled);
            report.mean = mean;
            return Ok(report);
        }
        survivors = kept.iter().map(|&i| survivors[i]).collect();
        report.iterations += 1;
    }
}

/// Result of a pruning rule on one round of projections.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PruneOutcome {
    /// Kept indices, ascending.
    pub kept: Vec<usize>,
    /// Whether the log slack term had to be dropped (`dτ ≤ 0.1`).
    pub slack_clamped: bool,
}

/// `|p_i − med(P)|` for every projection.
fn median_distances<T: Real>(p: &[T]) -> Vec<T> {
    let med = median(p);
    p.iter().map(|&v| (v - med).abs()).collect()
}

/// Indices ordered by ascending distance, ties by index.
fn ascending_order<T: Real>(dist: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dist.len()).collect();
    order.sort_by(|&a, &b| {
        dist[a]
            .partial_cmp(&dist[b])
            .expect("finite distances")
            .then(a.cmp(&b))
    });
    order
}

fn keep_prefix(order: &[usize], cut: usize) -> Vec<usize> {
    let mut kept = order[..cut].to_vec();
    kept.sort_unstable();
    kept
}

/// Gaussian-tail rule. Points are ranked by two-sided distance from the
/// projected median; with `T_i = dist_(i) − 2τ` the first position `i`
/// (0-based) satisfying
/// `(n − i)/n > γ (erfc(T_i/√2)/2 + τ/(d ln(dτ/0.1)))`
/// is pruned together with everything ranked after it.
pub fn gaussian_tail_prune<T: Real>(p: &[T], tau: f64, gamma: f64, d: usize) -> PruneOutcome {
    let n = p.len();
    let dist = median_distances(p);
    let order = ascending_order(&dist);
    let dt = d as f64 * tau;
    let (slack, slack_clamped) = if dt > 0.1 {
        (tau / (d as f64 * (dt / 0.1).ln()), false)
    } else {
        (0.0, true)
    };
    let nf = n as f64;
    let cut = order
        .iter()
        .enumerate()
        .position(|(i, &j)| {
            let t = dist[j].f64() - 2.0 * tau;
            let lhs = (nf - i as f64) / nf;
            lhs > gamma * (erfc(t / std::f64::consts::SQRT_2) / 2.0 + slack)
        })
        .unwrap_or(n);
    PruneOutcome {
        kept: keep_prefix(&order, cut),
        slack_clamped,
    }
}

/// Randomized rule: with `T` the largest distance and `Z = √U` (density `2z` on
/// `[0, 1]`), prune every point at distance `≥ T·Z`.
pub fn randomized_prune<T: Real, R: Rng + ?Sized>(p: &[T], rng: &mut R) -> PruneOutcome {
    let dist = median_distances(p);
    let t = dist.iter().copied().fold(T::zero(), T::max);
    let all = || (0..p.len()).collect::<Vec<_>>();
    if t == T::zero() {
        return PruneOutcome {
            kept: all(),
            slack_clamped: false,
        };
    }
    let u: f64 = rng.random();
    let cutoff = t * T::of(u.sqrt());
    PruneOutcome {
        kept: all().into_iter().filter(|&i| dist[i] < cutoff).collect(),
        slack_clamped: false,
    }
}

/// Fixed rule: prune the `⌈τ/2 · n⌉` points furthest from the median.
pub fn fixed_prune<T: Real>(p: &[T], tau: f64) -> PruneOutcome {
    let n = p.len();
    let m = ((tau / 2.0) * n as f64).ceil() as usize;
    let dist = median_distances(p);
    let order = ascending_order(&dist);
    PruneOutcome {
        kept: keep_prefix(&order, n - m.min(n)),
        slack_clamped: false,
    }
}

struct EvStep<'a> {
    spec: &'a EstimatorSpec,
    d: usize,
    direction: Vec<f64>,
}

impl<T: Real> FilterStep<T> for EvStep<'_> {
    fn top_eigenvalue<R: Rng + ?Sized>(&mut self, y: &Matrix<T>, rng: &mut R) -> Result<T> {
        let pair = top_scatter_eigenpair(y, T::of_usize(y.rows()), rng)?;
        self.direction = pair.vector.iter().map(|v| v.f64()).collect();
        Ok(pair.value)
    }

    fn prune<R: Rng + ?Sized>(
        &mut self,
        y: &Matrix<T>,
        report: &mut EstimateReport<T>,
        rng: &mut R,
    ) -> Result<Vec<usize>> {
        let v: Vec<T> = self.direction.iter().map(|&c| T::of(c)).collect();
        let p = y.matvec(&v);
        let out = match self.spec.pruning_rule {
            PruningRule::GaussianTail => {
                gaussian_tail_prune(&p, self.spec.tau, self.spec.gamma_slack, self.d)
            }
            PruningRule::Randomized => randomized_prune(&p, rng),
            PruningRule::Fixed => fixed_prune(&p, self.spec.tau),
        };
        if out.slack_clamped {
            report.flag(ReportFlag::SlackClamped);
        }
        Ok(out.kept)
    }
}

/// Spectral filtering along the top eigenvector until the top eigenvalue of
/// the survivors' covariance falls below the threshold.
pub fn ev_filtering<T: Real, R: Rng + ?Sized>(
    x: &Matrix<T>,
    spec: &EstimatorSpec,
    rng: &mut R,
) -> Result<EstimateReport<T>> {
    let mut step = EvStep {
        spec,
        d: x.cols(),
        direction: Vec::new(),
    };
    filter_loop(x, spec, &mut step, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tight_cluster_survives() {
        let p: Vec<f64> = (0..50).map(|i| 0.001 * i as f64).collect();
        let out = gaussian_tail_prune(&p, 0.1, 5.0, 100);
        assert_eq!(out.kept.len(), 50);
    }

    #[test]
    fn huge_slack_prunes_nothing() {
        let mut p: Vec<f64> = (0..50).map(|i| 0.01 * i as f64).collect();
        p.push(1e6);
        let out = gaussian_tail_prune(&p, 0.1, 1e300, 100);
        assert_eq!(out.kept.len(), 51);
    }

    #[test]
    fn fixed_rule_counts() {
        let p = [0.0f64, 1.0, -1.0, 5.0, 0.5, -0.2, 0.1, 0.3, -0.4, 9.0];
        let out = fixed_prune(&p, 0.2);
        assert_eq!(out.kept.len(), 9);
        assert!(!out.kept.contains(&9));
    }

    struct Recording<'a> {
        inner: EvStep<'a>,
        sizes: Vec<usize>,
    }

    impl FilterStep<f64> for Recording<'_> {
        fn top_eigenvalue<R: Rng + ?Sized>(&mut self, y: &Matrix<f64>, rng: &mut R) -> Result<f64> {
            self.sizes.push(y.rows());
            self.inner.top_eigenvalue(y, rng)
        }

        fn prune<R: Rng + ?Sized>(
            &mut self,
            y: &Matrix<f64>,
            report: &mut EstimateReport<f64>,
            rng: &mut R,
        ) -> Result<Vec<usize>> {
            let kept = self.inner.prune(y, report, rng)?;
            assert!(kept.windows(2).all(|w| w[0] < w[1]));
            assert!(kept.iter().all(|&i| i < y.rows()));
            Ok(kept)
        }
    }

    #[test]
    fn survivors_shrink_every_round() {
        use rand::SeedableRng;
        use rand_distr::StandardNormal;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let (n, d) = (150, 40);
        let data: Vec<f64> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
        let mut x = Matrix::from_vec(n, d, data).unwrap();
        for i in 0..15 {
            x.row_mut(i)[0] += 12.0;
        }
        for rule in [
            PruningRule::GaussianTail,
            PruningRule::Randomized,
            PruningRule::Fixed,
        ] {
            let spec = EstimatorSpec {
                kind: super::super::EstimatorKind::EvFiltering,
                threshold_mode: crate::thresholds::ThresholdMode::Legacy,
                pruning_rule: rule,
                ..EstimatorSpec::default()
            };
            let mut step = Recording {
                inner: EvStep {
                    spec: &spec,
                    d,
                    direction: Vec::new(),
                },
                sizes: Vec::new(),
            };
            let report = filter_loop(&x, &spec, &mut step, &mut rng).unwrap();
            assert!(step.sizes.len() > 1);
            assert!(step.sizes.windows(2).all(|w| w[1] < w[0]));
            let last = *step.sizes.last().unwrap();
            // the loop stops without measuring once fewer than 2 points remain
            assert!(report.pruned_count == n - last || n - report.pruned_count < 2);
        }
    }
}
