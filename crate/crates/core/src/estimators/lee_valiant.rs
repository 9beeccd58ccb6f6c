use rand::seq::index::sample;
use rand::Rng;

use super::{estimate, EstimateReport, EstimatorSpec, ReportFlag};
use crate::error::{invalid, Result};
use crate::numerics::Matrix;
use crate::scalar::Real;

/// Core of both Lee–Valiant variants given the initial subset and estimate.
///
/// The `⌈τn⌉` points with the largest `‖x − μ′‖` are discarded along with the
/// subset. `simple` averages the remaining raw points; otherwise the result is
/// `μ′ + Σ (x − μ′) / n` over the remaining points.
pub fn lee_valiant_from<T: Real>(
    x: &Matrix<T>,
    tau: f64,
    subset: &[usize],
    mu_prime: &[T],
    simple: bool,
) -> EstimateReport<T> {
    let n = x.rows();
    let t = (tau * n as f64).ceil() as usize;
    let norms: Vec<T> = x
        .row_iter()
        .map(|r| {
            r.iter()
                .zip(mu_prime)
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum::<T>()
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        norms[b]
            .partial_cmp(&norms[a])
            .expect("finite norms")
            .then(a.cmp(&b))
    });
    let mut excluded = vec![false; n];
    for &i in subset.iter().chain(&order[..t.min(n)]) {
        excluded[i] = true;
    }
    let rest: Vec<usize> = (0..n).filter(|&i| !excluded[i]).collect();
    let mut report = if rest.is_empty() {
        let mut r = EstimateReport::plain(mu_prime.to_vec());
        r.flag(ReportFlag::InitialEstimateFallback);
        r
    } else if simple {
        let mut acc = vec![T::zero(); x.cols()];
        for &i in &rest {
            for (a, &v) in acc.iter_mut().zip(x.row(i)) {
                *a += v;
            }
        }
        let inv = T::one() / T::of_usize(rest.len());
        EstimateReport::plain(acc.into_iter().map(|v| v * inv).collect())
    } else {
        let mut acc = vec![T::zero(); x.cols()];
        for &i in &rest {
            for ((a, &v), &m) in acc.iter_mut().zip(x.row(i)).zip(mu_prime) {
                *a += v - m;
            }
        }
        let inv = T::one() / T::of_usize(n);
        EstimateReport::plain(
            acc.into_iter()
                .zip(mu_prime)
                .map(|(v, &m)| m + v * inv)
                .collect(),
        )
    };
    report.pruned_count = n - rest.len();
    report
}

/// Lee–Valiant estimator: initial estimate on a random `⌈γn⌉` subset, then
/// [`lee_valiant_from`].
pub fn lee_valiant<T: Real, R: Rng + ?Sized>(
    x: &Matrix<T>,
    spec: &EstimatorSpec,
    simple: bool,
    rng: &mut R,
) -> Result<EstimateReport<T>> {
    let n = x.rows();
    if n < 4 {
        return Err(invalid(format!("lee_valiant needs n >= 4, got {n}")));
    }
    let m = ((spec.gamma_frac * n as f64).ceil() as usize).clamp(1, n);
    let mut subset = sample(rng, n, m).into_vec();
    subset.sort_unstable();
    let initial = EstimatorSpec {
        kind: spec.initial.kind(),
        label: None,
        trace_scaling: false,
        ..spec.clone()
    };
    let mu_prime = estimate(&x.select_rows(&subset), &initial, rng)?.mean;
    Ok(lee_valiant_from(x, spec.tau, &subset, &mu_prime, simple))
}
