use super::classic::coord_median;
use super::WeightingRule;
use crate::error::{Error, Result};
use crate::numerics::{full_sym_eigendecomposition, median, Matrix};
use crate::scalar::Real;

const EXPONENT_FLOOR: f64 = -50.0;

fn weights<T: Real>(x: &Matrix<T>, tau: f64, c: f64, rule: WeightingRule) -> Result<Vec<T>> {
    let n = x.rows();
    let a = coord_median(x);
    let dist2: Vec<T> = x
        .row_iter()
        .map(|r| r.iter().zip(&a).map(|(&v, &m)| (v - m) * (v - m)).sum())
        .collect();
    match rule {
        WeightingRule::Gaussian => {
            let s2 = median(&dist2);
            let floor = T::of(EXPONENT_FLOOR);
            let scale = T::of(c) * s2;
            let expo: Vec<T> = dist2
                .iter()
                .map(|&q| {
                    if scale > T::zero() {
                        (-q / scale).max(floor)
                    } else if q == T::zero() {
                        T::zero()
                    } else {
                        floor
                    }
                })
                .collect();
            if expo.iter().all(|&e| e <= floor) {
                return Err(Error::DegenerateWeights);
            }
            Ok(expo.into_iter().map(T::exp).collect())
        }
        WeightingRule::General => {
            let keep = (((1.0 - tau) * n as f64).ceil() as usize).clamp(1, n);
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&i, &j| {
                dist2[i]
                    .partial_cmp(&dist2[j])
                    .expect("finite distances")
                    .then(i.cmp(&j))
            });
            let mut w = vec![T::zero(); n];
            for &i in &order[..keep] {
                w[i] = T::one();
            }
            Ok(w)
        }
    }
}

/// Recursive dimension-halving estimator with `coord_median` in the `d ≤ 2`
/// base case.
pub fn lrv<T: Real>(x: &Matrix<T>, tau: f64, c: f64, rule: WeightingRule) -> Result<Vec<T>> {
    let (n, d) = x.shape();
    if d <= 2 {
        return Ok(coord_median(x));
    }
    let w = weights(x, tau, c, rule)?;
    let wsum: T = w.iter().copied().sum();
    let mut mu_w = vec![T::zero(); d];
    for (r, &wi) in x.row_iter().zip(&w) {
        for (m, &v) in mu_w.iter_mut().zip(r) {
            *m += wi * v;
        }
    }
    mu_w.iter_mut().for_each(|m| *m /= wsum);
    // Σ_w from rows √(w_i/Σw)(x_i − μ_w)
    let mut y = Matrix::zeros(n, d);
    for i in 0..n {
        let s = (w[i] / wsum).sqrt();
        for (o, (&v, &m)) in y.row_mut(i).iter_mut().zip(x.row(i).iter().zip(&mu_w)) {
            *o = s * (v - m);
        }
    }
    let cov = crate::numerics::scatter(&y, T::one());
    let eig = full_sym_eigendecomposition(&cov)?;
    let h = d / 2;
    // basis of the top-h eigenspace, one vector per row
    let mut vt = Matrix::zeros(h, d);
    for k in 0..h {
        for j in 0..d {
            vt[(k, j)] = eig.vectors[(j, k)];
        }
    }
    let projected = x.matmul(&vt.transpose())?;
    let mu1 = lrv(&projected, tau, c, rule)?;
    // μ = V μ1 + V⊥V⊥ᵀ μ_w = μ_w + V (μ1 − Vᵀ μ_w)
    let vtmu = vt.matvec(&mu_w);
    let diff: Vec<T> = mu1.iter().zip(&vtmu).map(|(&a, &b)| a - b).collect();
    let lift = vt.tr_matvec(&diff);
    Ok(mu_w.iter().zip(&lift).map(|(&a, &b)| a + b).collect())
}
