use serde::{Deserialize, Serialize};

use super::matrix::{axpy, dot, Matrix};
use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Divisor used when forming a sample covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `1/n`, the form the spectral thresholds are stated for.
    OverN,
    /// `1/(n-1)`, the unbiased form used by the trace heuristic.
    OverNMinus1,
}

impl Normalization {
    pub fn divisor<T: Real>(self, n: usize) -> T {
        match self {
            Normalization::OverN => T::of_usize(n),
            Normalization::OverNMinus1 => T::of_usize(n - 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceResult<T> {
    pub mean: Vec<T>,
    pub covariance: Matrix<T>,
    pub normalization: Normalization,
}

/// Arithmetic mean of the rows.
pub fn column_mean<T: Real>(x: &Matrix<T>) -> Vec<T> {
    let mut m = vec![T::zero(); x.cols()];
    for r in x.row_iter() {
        for (acc, &v) in m.iter_mut().zip(r) {
            *acc += v;
        }
    }
    let inv = T::one() / T::of_usize(x.rows().max(1));
    m.iter_mut().for_each(|v| *v *= inv);
    m
}

/// `x - 1 centerᵀ`.
pub fn centered<T: Real>(x: &Matrix<T>, center: &[T]) -> Matrix<T> {
    let mut out = x.clone();
    for i in 0..out.rows() {
        for (v, &c) in out.row_mut(i).iter_mut().zip(center) {
            *v -= c;
        }
    }
    out
}

/// `yᵀ y / divisor`, exploiting symmetry.
pub fn scatter<T: Real>(y: &Matrix<T>, divisor: T) -> Matrix<T> {
    let d = y.cols();
    let mut s = Matrix::zeros(d, d);
    // accumulate upper triangle row by row: s[j, j..] += y_j * y[j..]
    for r in y.row_iter() {
        for j in 0..d {
            let yj = r[j];
            if yj == T::zero() {
                continue;
            }
            let dst = &mut s.row_mut(j)[j..];
            axpy(yj, &r[j..], dst);
        }
    }
    let inv = T::one() / divisor;
    for j in 0..d {
        for k in j..d {
            let v = s[(j, k)] * inv;
            s[(j, k)] = v;
            s[(k, j)] = v;
        }
    }
    s
}

/// `y yᵀ / divisor` (the `n x n` Gram form).
pub fn gram<T: Real>(y: &Matrix<T>, divisor: T) -> Matrix<T> {
    let n = y.rows();
    let mut g = Matrix::zeros(n, n);
    let inv = T::one() / divisor;
    for i in 0..n {
        for j in i..n {
            let v = dot(y.row(i), y.row(j)) * inv;
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// Sample mean and covariance with the requested divisor.
pub fn center_and_covariance<T: Real>(
    x: &Matrix<T>,
    normalization: Normalization,
) -> Result<CovarianceResult<T>> {
    if x.rows() < 2 {
        return Err(invalid(format!(
            "covariance needs at least 2 samples, got {}",
            x.rows()
        )));
    }
    let mean = column_mean(x);
    let y = centered(x, &mean);
    let covariance = scatter(&y, normalization.divisor(x.rows()));
    Ok(CovarianceResult {
        mean,
        covariance,
        normalization,
    })
}
