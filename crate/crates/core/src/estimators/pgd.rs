use rand::Rng;

use super::{EstimateReport, EstimatorSpec};
use crate::error::{invalid, Result};
use crate::numerics::{dot, norm, project_capped_simplex, top_scatter_eigenpair, Matrix};
use crate::scalar::Real;

/// `∇_w F(w, u) = Xu ⊙ Xu − 2 (wᵀXu) Xu` for `F(w, u) = uᵀ Σ_w u`.
pub fn pgd_gradient<T: Real>(x: &Matrix<T>, w: &[T], u: &[T]) -> Vec<T> {
    let xu = x.matvec(u);
    let wxu = dot(w, &xu);
    let two = T::of(2.0);
    xu.iter().map(|&p| p * p - two * wxu * p).collect()
}

/// `F(w, u) = Σ w_i (x_iᵀu)² − (wᵀXu)²`.
pub fn pgd_objective<T: Real>(x: &Matrix<T>, w: &[T], u: &[T]) -> T {
    let xu = x.matvec(u);
    let wxu = dot(w, &xu);
    w.iter().zip(&xu).map(|(&wi, &p)| wi * p * p).sum::<T>() - wxu * wxu
}

fn weighted_mean<T: Real>(x: &Matrix<T>, w: &[T]) -> Vec<T> {
    x.tr_matvec(w)
}

struct Spectral<T> {
    mean: Vec<T>,
    value: T,
    direction: Vec<T>,
    /// `x_i − μ_w`.
    centered: Matrix<T>,
}

fn weighted_top<T: Real, R: Rng + ?Sized>(
    x: &Matrix<T>,
    w: &[T],
    rng: &mut R,
) -> Result<Spectral<T>> {
    let (n, d) = x.shape();
    let mean = weighted_mean(x, w);
    let mut centered = Matrix::zeros(n, d);
    let mut rows = Matrix::zeros(n, d);
    for i in 0..n {
        let s = w[i].max(T::zero()).sqrt();
        for j in 0..d {
            let c = x[(i, j)] - mean[j];
            centered[(i, j)] = c;
            rows[(i, j)] = s * c;
        }
    }
    let pair = top_scatter_eigenpair(&rows, T::one(), rng)?;
    Ok(Spectral {
        mean,
        value: pair.value,
        direction: pair.vector,
        centered,
    })
}

/// Projected gradient descent on the top eigenvalue of the weighted
/// covariance over `{Σw = 1, 0 ≤ w_i ≤ 1/((1 − 2τ)n)}`.
///
/// Each step moves `step` along the unit-normalised gradient. The step starts
/// at `1/n`; an accepted step (objective decreased) doubles it, a rejected one
/// is reverted and halves it.
pub fn pgd<T: Real, R: Rng + ?Sized>(
    x: &Matrix<T>,
    spec: &EstimatorSpec,
    rng: &mut R,
) -> Result<EstimateReport<T>> {
    let n = x.rows();
    if n < 2 {
        return Err(invalid(format!("pgd needs n >= 2, got {n}")));
    }
    if spec.tau >= 0.5 {
        return Err(invalid(format!("pgd needs tau < 0.5, got {}", spec.tau)));
    }
    let nt = T::of_usize(n);
    let cap = T::one() / (T::of(1.0 - 2.0 * spec.tau) * nt);
    let mut w = vec![T::one() / nt; n];
    let mut cur = weighted_top(x, &w, rng)?;
    let mut step = T::one() / nt;
    let mut iterations = 0;
    for _ in 0..spec.gamma_iters {
        // centered data: the constant shift (wᵀXu)² drops out of the projection
        let g = pgd_gradient(&cur.centered, &w, &cur.direction);
        let gn = norm(&g);
        if gn == T::zero() {
            break;
        }
        let trial: Vec<T> = w
            .iter()
            .zip(&g)
            .map(|(&wi, &gi)| wi - step * gi / gn)
            .collect();
        let next_w = project_capped_simplex(&trial, cap)?;
        iterations += 1;
        let next = weighted_top(x, &next_w, rng)?;
        if next.value < cur.value {
            w = next_w;
            cur = next;
            step *= T::of(2.0);
        } else {
            step /= T::of(2.0);
        }
    }
    let mut report = EstimateReport::plain(cur.mean);
    report.iterations = iterations;
    report.final_top_eigenvalue = cur.value.f64();
    report.pruned_count = w.iter().filter(|&&v| v == T::zero()).count();
    Ok(report)
}
