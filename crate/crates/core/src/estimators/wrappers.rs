use rand::Rng;

use super::{EstimateReport, ReportFlag};
use crate::error::Result;
use crate::numerics::{column_mean, Matrix};
use crate::scalar::Real;

/// `√(Tr(Σ̂)/d)` with `Tr(Σ̂) = Σ‖x_i − x̄‖² / (n − 1)`.
pub fn trace_scale<T: Real>(x: &Matrix<T>) -> T {
    let (n, d) = x.shape();
    if n < 2 {
        return T::zero();
    }
    let mean = column_mean(x);
    let total: T = x
        .row_iter()
        .map(|r| {
            r.iter()
                .zip(&mean)
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum::<T>()
        })
        .sum();
    (total / T::of_usize(n - 1) / T::of_usize(d)).sqrt()
}

/// Divide the data by [`trace_scale`], run `inner`, and scale the estimate back.
pub fn trace_scaled<T, R, F>(x: &Matrix<T>, inner: F, rng: &mut R) -> Result<EstimateReport<T>>
where
    T: Real,
    R: Rng + ?Sized,
    F: FnOnce(&Matrix<T>, &mut R) -> Result<EstimateReport<T>>,
{
    if x.rows() < 2 {
        return inner(x, rng);
    }
    let scale = trace_scale(x);
    if scale == T::zero() {
        let mut report = EstimateReport::plain(x.row(0).to_vec());
        report.flag(ReportFlag::ZeroTrace);
        return Ok(report);
    }
    let inv = T::one() / scale;
    let mut report = inner(&x.map(|v| v * inv), rng)?;
    report.mean.iter_mut().for_each(|v| *v *= scale);
    Ok(report)
}
