//! Dense linear algebra and special functions shared by the estimators.

pub mod covariance;
pub mod eigen;
pub mod matrix;
pub mod orthogonal;
pub mod simplex;
pub mod special;

pub use covariance::{
    center_and_covariance, centered, column_mean, gram, scatter, CovarianceResult, Normalization,
};
pub use eigen::{
    full_sym_eigendecomposition, power_iteration, scatter_spectrum, top_eigenpair,
    top_scatter_eigenpair, tridiagonal_eigen, EigenPair, ScatterOperator, ScatterSpectrum,
    SymEigen, SymOperator, EIGEN_MAX_ITER, EIGEN_TOL,
};
pub use matrix::{axpy, dot, norm, normalize, DataMatrix, Matrix};
pub use orthogonal::{random_direction, random_orthogonal};
pub use simplex::project_capped_simplex;
pub use special::erfc;

use crate::scalar::Real;

/// Median with the midpoint convention for even counts. Sorts in place.
pub fn median_in_place<T: Real>(v: &mut [T]) -> T {
    assert!(!v.is_empty(), "median of an empty slice");
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / T::of(2.0)
    }
}

pub fn median<T: Real>(v: &[T]) -> T {
    let mut c = v.to_vec();
    median_in_place(&mut c)
}
