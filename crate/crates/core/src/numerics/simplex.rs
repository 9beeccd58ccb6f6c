use crate::error::{Error, Result};
use crate::scalar::Real;

/// Euclidean projection onto `{w : Σ w_i = 1, 0 ≤ w_i ≤ cap}`.
///
/// The projection is `clip(w − θ, 0, cap)` for the unique shift `θ` that makes
/// the entries sum to one; `θ` is found exactly by locating the linear piece
/// of the clipped sum that crosses one.
pub fn project_capped_simplex<T: Real>(w: &[T], cap: T) -> Result<Vec<T>> {
    let n = w.len();
    let total = cap * T::of_usize(n);
    let slack = T::of(1e-12);
    if n == 0 || !(cap > T::zero()) || total < T::one() - slack {
        return Err(Error::InfeasibleSet { cap: cap.f64(), n });
    }
    if total <= T::one() + slack {
        // the set is the single point (1/n, ..., 1/n)
        return Ok(vec![T::one() / T::of_usize(n); n]);
    }
    let clipped_sum = |theta: T| -> T {
        w.iter()
            .map(|&x| (x - theta).max(T::zero()).min(cap))
            .sum::<T>()
    };
    let mut breaks: Vec<T> = w.iter().flat_map(|&x| [x - cap, x]).collect();
    breaks.sort_by(|a, b| a.partial_cmp(b).expect("finite weights"));
    breaks.dedup();
    // clipped_sum is non-increasing in θ: n·cap at breaks[0], 0 at the last
    let (mut lo, mut hi) = (0usize, breaks.len() - 1);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if clipped_sum(breaks[mid]) >= T::one() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (a, b) = (breaks[lo], breaks[hi]);
    let (fa, fb) = (clipped_sum(a), clipped_sum(b));
    let theta = if fa == fb {
        a
    } else {
        a + (fa - T::one()) / (fa - fb) * (b - a)
    };
    Ok(w.iter()
        .map(|&x| (x - theta).max(T::zero()).min(cap))
        .collect())
}
