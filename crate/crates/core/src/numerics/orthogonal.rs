use rand::Rng;
use rand_distr::StandardNormal;

use super::matrix::{dot, normalize, Matrix};
use crate::scalar::Real;

fn gaussian_column<T: Real, R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<T> {
    (0..d)
        .map(|_| T::of(rng.sample::<f64, _>(StandardNormal)))
        .collect()
}

/// Haar-distributed orthogonal matrix: the `Q` factor of a standard-normal
/// matrix, with column signs fixed so that `R` has a positive diagonal.
///
/// The normal matrix is drawn column by column, so the first column of the
/// result equals [`random_direction`] under the same RNG state.
pub fn random_orthogonal<T: Real, R: Rng + ?Sized>(d: usize, rng: &mut R) -> Matrix<T> {
    // a holds the Gaussian draw with columns as rows (aᵀ) for contiguous access
    let mut at = Matrix::zeros(d, d);
    for j in 0..d {
        let c = gaussian_column::<T, R>(d, rng);
        at.row_mut(j).copy_from_slice(&c);
    }
    let mut reflectors: Vec<Vec<T>> = Vec::with_capacity(d);
    let mut r_diag = vec![T::zero(); d];
    for k in 0..d {
        let x = &at.row(k)[k..];
        let nx = dot(x, x).sqrt();
        let alpha = if x[0] > T::zero() { -nx } else { nx };
        let mut v = x.to_vec();
        v[0] -= alpha;
        r_diag[k] = alpha;
        if normalize(&mut v) == T::zero() {
            reflectors.push(v);
            continue;
        }
        // apply H = I - 2vvᵀ to remaining columns k..d (rows of `at`)
        for j in k..d {
            let col = &mut at.row_mut(j)[k..];
            let s = T::of(2.0) * dot(&v, col);
            for (c, &vi) in col.iter_mut().zip(&v) {
                *c -= s * vi;
            }
        }
        reflectors.push(v);
    }
    // Q = H_0 H_1 ... H_{d-1}; accumulate on the identity, stored transposed
    // (row j of qt is column j of Q)
    let mut qt = Matrix::identity(d);
    for k in (0..d).rev() {
        let v = &reflectors[k];
        for j in 0..d {
            let col = &mut qt.row_mut(j)[k..];
            let s = T::of(2.0) * dot(v, col);
            for (c, &vi) in col.iter_mut().zip(v) {
                *c -= s * vi;
            }
        }
    }
    let mut q = qt.transpose();
    for (k, &r) in r_diag.iter().enumerate() {
        if r < T::zero() {
            for i in 0..d {
                q[(i, k)] = -q[(i, k)];
            }
        }
    }
    q
}

/// Uniformly random unit vector: `random_orthogonal(d) e₁` without building
/// the remaining columns.
pub fn random_direction<T: Real, R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<T> {
    loop {
        let mut v = gaussian_column::<T, R>(d, rng);
        if normalize(&mut v) > T::zero() {
            return v;
        }
    }
}
