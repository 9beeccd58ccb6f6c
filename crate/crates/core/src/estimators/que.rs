use rand::Rng;

use super::filter::{filter_loop, FilterStep};
use super::{EstimateReport, EstimatorSpec};
use crate::error::Result;
use crate::numerics::{centered, column_mean, dot, scatter_spectrum, Matrix, ScatterSpectrum};
use crate::scalar::Real;

/// `(y_i)ᵀ U y_i` with `U = exp(αΣ)/tr(exp(αΣ))` for the centered rows `y`
/// and `Σ = yᵀy / n`, given the spectrum of `Σ`.
///
/// Only the `min(n, d)` eigenpairs in `spec` are explicit; the rest of the
/// spectrum is zero, which contributes `e^0` on the orthogonal complement.
fn scores_from_spectrum<T: Real>(y: &Matrix<T>, spec: &ScatterSpectrum<T>, alpha: T) -> Vec<T> {
    let d = T::of_usize(y.cols());
    let lmax = spec.values[0];
    // shifted by λ_max so the largest exponent is 0
    let base = (-alpha * lmax).exp();
    let excess: Vec<T> = spec
        .values
        .iter()
        .map(|&l| (alpha * (l - lmax)).exp() - base)
        .collect();
    let den = d * base + excess.iter().copied().sum::<T>();
    (0..y.rows())
        .map(|i| {
            let c = spec.coords.row(i);
            let yi = y.row(i);
            let mut num = base * dot(yi, yi);
            for (&e, &ck) in excess.iter().zip(c) {
                num += e * ck * ck;
            }
            num / den
        })
        .collect()
}

/// Quantum entropy scores of the rows of `x`, centered at the sample mean.
pub fn que_scores<T: Real>(x: &Matrix<T>, alpha: f64) -> Result<Vec<T>> {
    let y = centered(x, &column_mean(x));
    let spec = scatter_spectrum(&y, T::of_usize(x.rows()))?;
    Ok(scores_from_spectrum(&y, &spec, T::of(alpha)))
}

struct QueStep<T> {
    tau: f64,
    alpha: T,
    spectrum: Option<ScatterSpectrum<T>>,
}

impl<T: Real> FilterStep<T> for QueStep<T> {
    fn top_eigenvalue<R: Rng + ?Sized>(&mut self, y: &Matrix<T>, _rng: &mut R) -> Result<T> {
        let s = scatter_spectrum(y, T::of_usize(y.rows()))?;
        let top = s.values[0];
        self.spectrum = Some(s);
        Ok(top)
    }

    fn prune<R: Rng + ?Sized>(
        &mut self,
        y: &Matrix<T>,
        _report: &mut EstimateReport<T>,
        _rng: &mut R,
    ) -> Result<Vec<usize>> {
        let spec = self
            .spectrum
            .take()
            .expect("spectrum computed before prune");
        let scores = scores_from_spectrum(y, &spec, self.alpha);
        let n = y.rows();
        let m = ((self.tau / 2.0) * n as f64).ceil() as usize;
        let mut order: Vec<usize> = (0..n).collect();
        // highest score first, ties by lowest index
        order.sort_by(|&a, &b| {
            scores[b]
                .partial_cmp(&scores[a])
                .expect("finite scores")
                .then(a.cmp(&b))
        });
        let mut kept = order[m.min(n)..].to_vec();
        kept.sort_unstable();
        Ok(kept)
    }
}

/// Iterative pruning by quantum entropy score, `⌈τ/2 · n⌉` points per round.
pub fn que<T: Real, R: Rng + ?Sized>(
    x: &Matrix<T>,
    spec: &EstimatorSpec,
    rng: &mut R,
) -> Result<EstimateReport<T>> {
    let mut step = QueStep {
        tau: spec.tau,
        alpha: T::of(spec.alpha),
        spectrum: None,
    };
    filter_loop(x, spec, &mut step, rng)
}
