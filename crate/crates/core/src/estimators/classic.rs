use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{invalid, Result};
use crate::numerics::{column_mean, median_in_place, normalize, Matrix};
use crate::scalar::Real;

pub const WEISZFELD_TOL: f64 = 1e-8;
pub const WEISZFELD_MAX_ITER: usize = 1000;
const WEISZFELD_FLOOR: f64 = 1e-10;

pub fn sample_mean<T: Real>(x: &Matrix<T>) -> Vec<T> {
    column_mean(x)
}

pub fn coord_median<T: Real>(x: &Matrix<T>) -> Vec<T> {
    (0..x.cols())
        .map(|j| median_in_place(&mut x.col(j)))
        .collect()
}

/// Per-coordinate mean after dropping the `⌊τn⌋` smallest and largest values.
pub fn coord_trimmed_mean<T: Real>(x: &Matrix<T>, tau: f64) -> Result<Vec<T>> {
    let n = x.rows();
    let g = (tau * n as f64).floor() as usize;
    if 2 * g >= n {
        return Err(invalid(format!(
            "trimming {g} points from each side exhausts {n} samples"
        )));
    }
    Ok((0..x.cols())
        .map(|j| {
            let mut c = x.col(j);
            c.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
            let kept = &c[g..n - g];
            kept.iter().copied().sum::<T>() / T::of_usize(kept.len())
        })
        .collect())
}

/// Coordinate-wise median of `k` chunk means after a random shuffle.
/// `k` is clamped to `n`.
pub fn median_of_means<T: Real, R: Rng + ?Sized>(x: &Matrix<T>, k: usize, rng: &mut R) -> Vec<T> {
    let mut order: Vec<usize> = (0..x.rows()).collect();
    order.shuffle(rng);
    median_of_means_ordered(x, k, &order)
}

/// [`median_of_means`] with an explicit row order. Chunks are contiguous in
/// `order`; the first `n mod k` chunks hold one extra row.
pub fn median_of_means_ordered<T: Real>(x: &Matrix<T>, k: usize, order: &[usize]) -> Vec<T> {
    let n = order.len();
    let k = k.clamp(1, n.max(1));
    let d = x.cols();
    let (base, extra) = (n / k, n % k);
    let mut means = Matrix::zeros(k, d);
    let mut start = 0;
    for c in 0..k {
        let len = base + usize::from(c < extra);
        let row = means.row_mut(c);
        for &i in &order[start..start + len] {
            for (m, &v) in row.iter_mut().zip(x.row(i)) {
                *m += v;
            }
        }
        let inv = T::one() / T::of_usize(len);
        row.iter_mut().for_each(|m| *m *= inv);
        start += len;
    }
    coord_median(&means)
}

fn sum_of_distances<T: Real>(x: &Matrix<T>, y: &[T]) -> T {
    x.row_iter()
        .map(|r| {
            r.iter()
                .zip(y)
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum::<T>()
                .sqrt()
        })
        .sum()
}

#[derive(Debug, Clone)]
pub struct WeiszfeldTrace<T> {
    pub point: Vec<T>,
    /// `Σ‖x_i − y_k‖` for the start and every iterate.
    pub objective: Vec<T>,
    pub iterations: usize,
}

/// Weiszfeld iteration started at the sample mean.
pub fn geometric_median_trace<T: Real>(
    x: &Matrix<T>,
    tol: f64,
    max_iter: usize,
) -> WeiszfeldTrace<T> {
    let d = x.cols();
    let floor = T::of(WEISZFELD_FLOOR);
    let tol = T::of(tol);
    let mut y = column_mean(x);
    let mut objective = vec![sum_of_distances(x, &y)];
    let mut iterations = 0;
    for _ in 0..max_iter {
        let mut num = vec![T::zero(); d];
        let mut den = T::zero();
        for r in x.row_iter() {
            let dist = r
                .iter()
                .zip(&y)
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum::<T>()
                .sqrt()
                .max(floor);
            let w = T::one() / dist;
            den += w;
            for (acc, &v) in num.iter_mut().zip(r) {
                *acc += w * v;
            }
        }
        let next: Vec<T> = num.iter().map(|&v| v / den).collect();
        let mut step: Vec<T> = next.iter().zip(&y).map(|(&a, &b)| a - b).collect();
        let moved = normalize(&mut step);
        y = next;
        iterations += 1;
        objective.push(sum_of_distances(x, &y));
        if moved <= tol {
            break;
        }
    }
    WeiszfeldTrace {
        point: y,
        objective,
        iterations,
    }
}

pub fn geometric_median<T: Real>(x: &Matrix<T>, tol: f64, max_iter: usize) -> Vec<T> {
    geometric_median_trace(x, tol, max_iter).point
}
