//! Symmetric eigen-solvers.
//!
//! Dense decomposition is Householder tridiagonalisation followed by implicit
//! QL iterations. The leading pair of large sample covariances is found with a
//! Lanczos iteration on the implicit operator `YᵀY / c` (or its Gram twin
//! `YYᵀ / c` when there are fewer samples than dimensions), so the `d x d`
//! matrix is never formed.

use rand::Rng;
use rand_distr::StandardNormal;

use super::covariance::{gram, scatter};
use super::matrix::{axpy, dot, norm, normalize, Matrix};
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// Default residual tolerance for the leading eigenpair.
pub const EIGEN_TOL: f64 = 1e-8;
/// Default cap on operator applications for iterative solvers.
pub const EIGEN_MAX_ITER: usize = 2000;

/// A symmetric linear operator.
pub trait SymOperator<T: Real> {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[T], out: &mut [T]);
}

impl<T: Real> SymOperator<T> for Matrix<T> {
    fn dim(&self) -> usize {
        self.rows()
    }

    fn apply(&self, x: &[T], out: &mut [T]) {
        for (o, r) in out.iter_mut().zip(self.row_iter()) {
            *o = dot(r, x);
        }
    }
}

/// `YᵀY / c` on `R^d`, or `YYᵀ / c` on `R^n` when `n < d`.
///
/// Both share their non-zero spectrum.
pub struct ScatterOperator<'a, T> {
    rows: &'a Matrix<T>,
    inv_divisor: T,
    gram_side: bool,
}

impl<'a, T: Real> ScatterOperator<'a, T> {
    pub fn new(rows: &'a Matrix<T>, divisor: T) -> Self {
        Self {
            rows,
            inv_divisor: T::one() / divisor,
            gram_side: rows.rows() < rows.cols(),
        }
    }

    pub fn is_gram_side(&self) -> bool {
        self.gram_side
    }

    /// Map an eigenvector of this operator back to `R^d`.
    pub fn lift(&self, v: &[T]) -> Vec<T> {
        if !self.gram_side {
            return v.to_vec();
        }
        let mut u = self.rows.tr_matvec(v);
        if normalize(&mut u) == T::zero() {
            u = basis_vector(self.rows.cols(), 0);
        }
        u
    }
}

impl<T: Real> SymOperator<T> for ScatterOperator<'_, T> {
    fn dim(&self) -> usize {
        if self.gram_side {
            self.rows.rows()
        } else {
            self.rows.cols()
        }
    }

    fn apply(&self, x: &[T], out: &mut [T]) {
        let res = if self.gram_side {
            let t = self.rows.tr_matvec(x);
            self.rows.matvec(&t)
        } else {
            let t = self.rows.matvec(x);
            self.rows.tr_matvec(&t)
        };
        for (o, v) in out.iter_mut().zip(res) {
            *o = v * self.inv_divisor;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair<T> {
    pub value: T,
    /// Unit-norm eigenvector.
    pub vector: Vec<T>,
    /// `‖A v − λ v‖`.
    pub residual: T,
    /// Operator applications used.
    pub iterations: usize,
}

/// Full symmetric eigendecomposition, eigenvalues sorted descending.
#[derive(Debug, Clone, PartialEq)]
pub struct SymEigen<T> {
    pub values: Vec<T>,
    /// Column `k` is the eigenvector for `values[k]`.
    pub vectors: Matrix<T>,
}

impl<T: Real> SymEigen<T> {
    pub fn vector(&self, k: usize) -> Vec<T> {
        self.vectors.col(k)
    }

    /// `V diag(λ) Vᵀ`.
    pub fn reconstruct(&self) -> Matrix<T> {
        let n = self.values.len();
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut s = T::zero();
                for k in 0..n {
                    s += self.vectors[(i, k)] * self.values[k] * self.vectors[(j, k)];
                }
                out[(i, j)] = s;
            }
        }
        out
    }
}

fn basis_vector<T: Real>(n: usize, k: usize) -> Vec<T> {
    let mut v = vec![T::zero(); n];
    v[k] = T::one();
    v
}

pub(crate) fn random_unit<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<T> {
    loop {
        let mut v: Vec<T> = (0..n)
            .map(|_| T::of(rng.sample::<f64, _>(StandardNormal)))
            .collect();
        if normalize(&mut v) > T::zero() {
            return v;
        }
    }
}

fn residual<T: Real, O: SymOperator<T> + ?Sized>(op: &O, v: &[T], lambda: T) -> T {
    let mut av = vec![T::zero(); v.len()];
    op.apply(v, &mut av);
    axpy(-lambda, v, &mut av);
    norm(&av)
}

/// Dense symmetric eigendecomposition.
pub fn full_sym_eigendecomposition<T: Real>(s: &Matrix<T>) -> Result<SymEigen<T>> {
    let n = s.rows();
    if n != s.cols() {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: s.cols(),
        });
    }
    if n == 0 {
        return Ok(SymEigen {
            values: vec![],
            vectors: Matrix::zeros(0, 0),
        });
    }
    let mut v = s.clone();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tred2(&mut v, &mut d, &mut e);
    // tql2 wants the off-diagonal shifted down by one
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();
    // rows of `vt` are eigenvectors, keeping the QL rotations contiguous
    let mut vt = v.transpose();
    tql2(&mut d, &mut e, &mut vt)?;
    Ok(sorted_desc(d, &vt))
}

/// Eigendecomposition of a symmetric tridiagonal matrix given by its
/// diagonal and off-diagonal.
pub fn tridiagonal_eigen<T: Real>(diag: &[T], offdiag: &[T]) -> Result<SymEigen<T>> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![T::zero(); n];
    e[..n.saturating_sub(1)].copy_from_slice(&offdiag[..n.saturating_sub(1)]);
    let mut vt = Matrix::identity(n);
    tql2(&mut d, &mut e, &mut vt)?;
    Ok(sorted_desc(d, &vt))
}

fn sorted_desc<T: Real>(d: Vec<T>, vt: &Matrix<T>) -> SymEigen<T> {
    let n = d.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[b].partial_cmp(&d[a]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&k| d[k]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        for (i, &x) in vt.row(k).iter().enumerate() {
            vectors[(i, col)] = x;
        }
    }
    SymEigen { values, vectors }
}

/// Householder reduction to tridiagonal form (EISPACK `tred2`).
/// On exit `v` holds the accumulated orthogonal transform, `d` the diagonal
/// and `e[1..]` the sub-diagonal.
fn tred2<T: Real>(v: &mut Matrix<T>, d: &mut [T], e: &mut [T]) {
    let n = d.len();
    let zero = T::zero();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = zero;
        let mut h = zero;
        for &dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == zero {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = zero;
                v[(j, i)] = zero;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > zero {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = zero;
            }
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in j + 1..i {
                    let vkj = v[(k, j)];
                    g += vkj * d[k];
                    e[k] += vkj * f;
                }
                e[j] = g;
            }
            f = zero;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    let upd = f * e[k] + g * d[k];
                    v[(k, j)] -= upd;
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = zero;
            }
        }
        d[i] = h;
    }
    // accumulate transformations; work on columns i+1 through a scratch
    // buffer because `v` is row-major
    let mut col = vec![zero; n];
    for i in 0..n.saturating_sub(1) {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = T::one();
        let h = d[i + 1];
        if h != zero {
            for k in 0..=i {
                col[k] = v[(k, i + 1)];
                d[k] = col[k] / h;
            }
            for j in 0..=i {
                let mut g = zero;
                for k in 0..=i {
                    g += col[k] * v[(k, j)];
                }
                for k in 0..=i {
                    let dk = d[k];
                    v[(k, j)] -= g * dk;
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = zero;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = zero;
    }
    v[(n - 1, n - 1)] = T::one();
    e[0] = zero;
}

/// Implicit QL iterations on a symmetric tridiagonal matrix (EISPACK
/// `tql2`). `e[i]` couples `i` and `i+1`. Rotations are applied to the rows
/// of `vt`.
fn tql2<T: Real>(d: &mut [T], e: &mut [T], vt: &mut Matrix<T>) -> Result<()> {
    let n = d.len();
    let zero = T::zero();
    let one = T::one();
    let two = T::of(2.0);
    let eps = T::eps();
    let mut f = zero;
    let mut tst1 = zero;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m == n {
            m = n - 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(Error::Convergence {
                        iterations: iter,
                        residual: e[l].abs().f64(),
                    });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(one);
                if p < zero {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;
                p = d[m];
                let mut c = one;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = zero;
                let mut s2 = zero;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    rotate_rows(vt, i, c, s);
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = zero;
    }
    Ok(())
}

#[inline]
fn rotate_rows<T: Real>(vt: &mut Matrix<T>, i: usize, c: T, s: T) {
    let n = vt.cols();
    let data = vt.as_mut_slice();
    let (lo, hi) = data.split_at_mut((i + 1) * n);
    let ri = &mut lo[i * n..];
    let ri1 = &mut hi[..n];
    for (a, b) in ri.iter_mut().zip(ri1.iter_mut()) {
        let h = *b;
        *b = s * *a + c * h;
        *a = c * *a - s * h;
    }
}

/// Shifted power iteration for the algebraically largest eigenpair.
///
/// Plain iteration converges to the eigenvalue of largest magnitude; when that
/// one is negative the operator is shifted by it and iterated again.
pub fn power_iteration<T: Real, O: SymOperator<T> + ?Sized, R: Rng + ?Sized>(
    op: &O,
    tol: T,
    max_iter: usize,
    rng: &mut R,
) -> Result<EigenPair<T>> {
    let n = op.dim();
    if n == 0 {
        return Err(invalid("eigenpair of an empty operator"));
    }
    let start = random_unit(n, rng);
    let first = power_loop(op, T::zero(), start.clone(), tol, max_iter)?;
    if first.value >= T::zero() {
        return Ok(first);
    }
    let shift = first.value;
    let mut shifted = power_loop(op, shift, start, tol, max_iter)?;
    shifted.iterations += first.iterations;
    Ok(shifted)
}

fn power_loop<T: Real, O: SymOperator<T> + ?Sized>(
    op: &O,
    shift: T,
    mut v: Vec<T>,
    tol: T,
    max_iter: usize,
) -> Result<EigenPair<T>> {
    let n = v.len();
    let mut av = vec![T::zero(); n];
    let mut last_res = T::infinity();
    for it in 1..=max_iter {
        op.apply(&v, &mut av);
        let lambda = dot(&v, &av);
        // residual of the unshifted operator at the current iterate
        let mut r = av.clone();
        axpy(-lambda, &v, &mut r);
        last_res = norm(&r);
        if last_res <= tol * lambda.abs().max(T::one()) {
            return Ok(EigenPair {
                value: lambda,
                vector: v,
                residual: last_res,
                iterations: it,
            });
        }
        axpy(-shift, &v, &mut av);
        if normalize(&mut av) == T::zero() {
            // v lies in the null space of the (shifted) operator
            return Ok(EigenPair {
                value: lambda,
                vector: v,
                residual: last_res,
                iterations: it,
            });
        }
        std::mem::swap(&mut v, &mut av);
    }
    Err(Error::Convergence {
        iterations: max_iter,
        residual: last_res.f64(),
    })
}

/// Algebraically largest eigenpair by restarted Lanczos with full
/// reorthogonalisation.
///
/// Returns once `‖A v − λ v‖ ≤ tol · max(1, |λ|)`; `max_iter` caps the total
/// number of operator applications.
pub fn top_eigenpair<T: Real, O: SymOperator<T> + ?Sized, R: Rng + ?Sized>(
    op: &O,
    tol: T,
    max_iter: usize,
    rng: &mut R,
) -> Result<EigenPair<T>> {
    let n = op.dim();
    if n == 0 {
        return Err(invalid("eigenpair of an empty operator"));
    }
    let krylov_cap = n.min(120);
    let mut start = random_unit(n, rng);
    let mut used = 0usize;
    let mut best_res = T::infinity();
    let tiny = T::eps() * T::of(16.0);

    while used < max_iter {
        let mut basis: Vec<Vec<T>> = Vec::with_capacity(krylov_cap);
        let mut alpha: Vec<T> = Vec::with_capacity(krylov_cap);
        let mut beta: Vec<T> = Vec::with_capacity(krylov_cap);
        let mut q = start.clone();
        let mut w = vec![T::zero(); n];
        let mut scale = T::zero();
        let mut ritz: Option<(T, Vec<T>)> = None;

        for j in 0..krylov_cap {
            op.apply(&q, &mut w);
            used += 1;
            let a = dot(&w, &q);
            axpy(-a, &q, &mut w);
            if let (Some(prev), Some(&b)) = (basis.last(), beta.last()) {
                axpy(-b, prev, &mut w);
            }
            basis.push(q.clone());
            alpha.push(a);
            // two passes of classical Gram-Schmidt against the whole basis
            for _ in 0..2 {
                for qi in &basis {
                    let c = dot(&w, qi);
                    axpy(-c, qi, &mut w);
                }
            }
            let b = norm(&w);
            scale = scale.max(a.abs() + b);
            let m = j + 1;
            let exhausted = b <= tiny * scale.max(T::one()) || m == n;
            let check = exhausted || m == krylov_cap || m % 4 == 0 || used >= max_iter;
            if check {
                let tri = tridiagonal_eigen(&alpha, &beta)?;
                let theta = tri.values[0];
                let s = tri.vector(0);
                let converged = b * s[m - 1].abs() <= tol * theta.abs().max(T::one());
                if converged || exhausted || m == krylov_cap || used >= max_iter {
                    let mut y = vec![T::zero(); n];
                    for (qi, &si) in basis.iter().zip(&s) {
                        axpy(si, qi, &mut y);
                    }
                    normalize(&mut y);
                    ritz = Some((theta, y));
                    break;
                }
            }
            beta.push(b);
            if used >= max_iter {
                break;
            }
            let inv = T::one() / b;
            q = w.iter().map(|&x| x * inv).collect();
        }

        let Some((theta, y)) = ritz else { break };
        let res = residual(op, &y, theta);
        used += 1;
        if res <= tol * theta.abs().max(T::one()) {
            return Ok(EigenPair {
                value: theta,
                vector: y,
                residual: res,
                iterations: used,
            });
        }
        best_res = best_res.min(res);
        start = y;
    }
    Err(Error::Convergence {
        iterations: used,
        residual: best_res.f64(),
    })
}

/// Leading eigenpair of the sample scatter `YᵀY / divisor`, returned as a
/// vector in `R^d`. Falls back to the dense decomposition of the smaller
/// Gram/scatter form if the iterative solver stalls.
pub fn top_scatter_eigenpair<T: Real, R: Rng + ?Sized>(
    y: &Matrix<T>,
    divisor: T,
    rng: &mut R,
) -> Result<EigenPair<T>> {
    let op = ScatterOperator::new(y, divisor);
    let pair = match top_eigenpair(&op, T::of(EIGEN_TOL), EIGEN_MAX_ITER, rng) {
        Ok(p) => p,
        Err(Error::Convergence { iterations, .. }) => {
            let dense = if op.is_gram_side() {
                gram(y, divisor)
            } else {
                scatter(y, divisor)
            };
            let eig = full_sym_eigendecomposition(&dense)?;
            let v = eig.vector(0);
            let res = residual(&dense, &v, eig.values[0]);
            EigenPair {
                value: eig.values[0],
                vector: v,
                residual: res,
                iterations,
            }
        }
        Err(e) => return Err(e),
    };
    Ok(EigenPair {
        vector: op.lift(&pair.vector),
        ..pair
    })
}

/// Complete spectrum of `YᵀY / divisor` restricted to its (at most
/// `min(n, d)`) possibly non-zero eigenvalues.
#[derive(Debug, Clone)]
pub struct ScatterSpectrum<T> {
    /// Eigenvalues, descending; length `min(n, d)`.
    pub values: Vec<T>,
    /// `coords[(i, k)] = ⟨y_i, v_k⟩`.
    pub coords: Matrix<T>,
}

pub fn scatter_spectrum<T: Real>(y: &Matrix<T>, divisor: T) -> Result<ScatterSpectrum<T>> {
    let (n, d) = y.shape();
    if n >= d {
        let eig = full_sym_eigendecomposition(&scatter(y, divisor))?;
        let coords = y.matmul(&eig.vectors)?;
        Ok(ScatterSpectrum {
            values: eig.values,
            coords,
        })
    } else {
        // YYᵀ/c = W Λ Wᵀ  ⇒  ⟨y_i, v_k⟩ = sqrt(c λ_k) W_ik
        let eig = full_sym_eigendecomposition(&gram(y, divisor))?;
        let mut coords = Matrix::zeros(n, n);
        let mut values = eig.values;
        for (k, lam) in values.iter_mut().enumerate() {
            if *lam < T::zero() {
                *lam = T::zero();
            }
            let s = (divisor * *lam).sqrt();
            for i in 0..n {
                coords[(i, k)] = s * eig.vectors[(i, k)];
            }
        }
        Ok(ScatterSpectrum { values, coords })
    }
}
