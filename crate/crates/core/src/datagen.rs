//! Inlier distributions, corruption schemes and trial assembly.

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numerics::{column_mean, dot, normalize, random_direction, random_orthogonal, Matrix};
use crate::scalar::Real;

/// Inlier distribution family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InlierKind {
    GaussianIdentity,
    /// `N(μ, σ² I)`.
    GaussianSpherical {
        sigma: f64,
    },
    /// Diagonal covariance decreasing linearly from `top_variance` to 0.1.
    GaussianDiag {
        top_variance: f64,
    },
    /// Multivariate t with identity scale matrix.
    MultivariateT {
        nu: f64,
    },
    /// Independent Laplace coordinates.
    Laplace {
        scale: f64,
    },
    /// Independent Poisson coordinates; the mean is the rate.
    Poisson {
        rate: f64,
    },
    /// Equal-weight mixture of `N(μ + 1⃗, I)`, `N(μ, I)`, `N(μ − 1⃗, I)`.
    GaussianMixture3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InlierSpec {
    #[serde(flatten)]
    pub kind: InlierKind,
    /// Every coordinate of `μ` (ignored by Poisson, whose mean is its rate).
    #[serde(default = "default_mean_fill")]
    pub mean_fill: f64,
}

fn default_mean_fill() -> f64 {
    5.0
}

impl Default for InlierSpec {
    fn default() -> Self {
        Self::new(InlierKind::GaussianIdentity)
    }
}

impl InlierSpec {
    pub fn new(kind: InlierKind) -> Self {
        Self {
            kind,
            mean_fill: default_mean_fill(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.kind {
            InlierKind::GaussianSpherical { sigma } => sigma > 0.0,
            InlierKind::GaussianDiag { top_variance } => top_variance >= 0.1,
            InlierKind::MultivariateT { nu } => nu > 2.0,
            InlierKind::Laplace { scale } => scale > 0.0,
            InlierKind::Poisson { rate } => rate > 0.0,
            InlierKind::GaussianIdentity | InlierKind::GaussianMixture3 => true,
        };
        if !ok || !self.mean_fill.is_finite() {
            return Err(invalid(format!("invalid inlier parameters: {self:?}")));
        }
        Ok(())
    }

    pub fn true_mean(&self, d: usize) -> Vec<f64> {
        match self.kind {
            InlierKind::Poisson { rate } => vec![rate; d],
            _ => vec![self.mean_fill; d],
        }
    }

    /// Diagonal of the covariance, where the family has one of that form.
    pub fn diag_variances(&self, d: usize) -> Option<Vec<f64>> {
        match self.kind {
            InlierKind::GaussianIdentity => Some(vec![1.0; d]),
            InlierKind::GaussianSpherical { sigma } => Some(vec![sigma * sigma; d]),
            InlierKind::GaussianDiag { top_variance } => Some(
                (0..d)
                    .map(|j| {
                        if d == 1 {
                            top_variance
                        } else {
                            top_variance - (top_variance - 0.1) * j as f64 / (d - 1) as f64
                        }
                    })
                    .collect(),
            ),
            _ => None,
        }
    }
}

/// Subtle scheme paired with large outliers in [`NoiseKind::Mix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubtleKind {
    VarianceShell,
    Dkk,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    /// One `N(μ′, I/10)` cluster with `‖μ − μ′‖ = √d`.
    VarianceShell,
    /// `0.7 / 0.3` clusters at distance `√d`, `angle_deg` apart.
    TwoClusters {
        #[serde(default = "default_angle")]
        angle_deg: f64,
    },
    Dkk,
    /// Coordinates drawn from `Uniform(μ_j, μ_j + 2)`.
    UniformInDist,
    /// `0.7 / 0.3` clusters at distances `10√d` and `20√d`, 75° apart.
    LargeOutliers,
    /// Half large outliers, half a subtle scheme.
    Mix {
        subtle: SubtleKind,
    },
    /// Remove the most extreme points along a random direction.
    Subtractive,
}

fn default_angle() -> f64 {
    75.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(flatten)]
    pub kind: NoiseKind,
    /// True corruption fraction.
    #[serde(default)]
    pub eta: f64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, eta: f64) -> Self {
        Self { kind, eta }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta < 0.5) {
            return Err(invalid(format!(
                "eta must lie in [0, 0.5), got {}",
                self.eta
            )));
        }
        if let NoiseKind::TwoClusters { angle_deg } = self.kind {
            if !angle_deg.is_finite() {
                return Err(invalid("two_clusters angle must be finite"));
            }
        }
        Ok(())
    }

    pub fn is_additive(&self) -> bool {
        !matches!(self.kind, NoiseKind::Subtractive)
    }
}

/// `⌈ηn⌉`.
pub fn outlier_count(eta: f64, n: usize) -> usize {
    // guard against 0.1 * 500 = 50.00000000000001
    let raw = eta * n as f64;
    let r = raw.round();
    if (raw - r).abs() < 1e-9 {
        r as usize
    } else {
        raw.ceil() as usize
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn from_f64<T: Real>(n: usize, d: usize, data: Vec<f64>) -> Matrix<T> {
    Matrix::from_vec(n, d, data.into_iter().map(T::of).collect()).expect("shape matches")
}

/// `n` i.i.d. rows from the inlier distribution.
pub fn generate_inliers<T: Real, R: Rng + ?Sized>(
    spec: &InlierSpec,
    n: usize,
    d: usize,
    rng: &mut R,
) -> Result<Matrix<T>> {
    spec.validate()?;
    let mu = spec.true_mean(d);
    let mut out = Vec::with_capacity(n * d);
    match spec.kind {
        InlierKind::GaussianIdentity
        | InlierKind::GaussianSpherical { .. }
        | InlierKind::GaussianDiag { .. } => {
            let sd: Vec<f64> = spec
                .diag_variances(d)
                .expect("gaussian family")
                .into_iter()
                .map(f64::sqrt)
                .collect();
            for _ in 0..n {
                for j in 0..d {
                    out.push(mu[j] + sd[j] * normal(rng));
                }
            }
        }
        InlierKind::MultivariateT { nu } => {
            let chi = ChiSquared::new(nu).map_err(|e| invalid(e.to_string()))?;
            for _ in 0..n {
                let z: Vec<f64> = (0..d).map(|_| normal(rng)).collect();
                let s = (nu / chi.sample(rng)).sqrt();
                out.extend(z.iter().zip(&mu).map(|(&zj, &m)| m + s * zj));
            }
        }
        InlierKind::Laplace { scale } => {
            for _ in 0..n {
                for &m in &mu {
                    let u: f64 = rng.random::<f64>() - 0.5;
                    out.push(m - scale * u.signum() * (1.0 - 2.0 * u.abs()).ln());
                }
            }
        }
        InlierKind::Poisson { rate } => {
            let p = Poisson::new(rate).map_err(|e| invalid(e.to_string()))?;
            for _ in 0..n * d {
                out.push(p.sample(rng));
            }
        }
        InlierKind::GaussianMixture3 => {
            for _ in 0..n {
                let shift = [1.0, 0.0, -1.0][rng.random_range(0..3)];
                for &m in &mu {
                    out.push(m + shift + normal(rng));
                }
            }
        }
    }
    Ok(from_f64(n, d, out))
}

/// Offset scale for the identity-covariance constructions: `σ` for spherical
/// inliers, 1 otherwise.
fn spherical_sigma(spec: &InlierSpec) -> f64 {
    match spec.kind {
        InlierKind::GaussianSpherical { sigma } => sigma,
        _ => 1.0,
    }
}

fn is_diag(spec: &InlierSpec) -> bool {
    matches!(spec.kind, InlierKind::GaussianDiag { .. })
}

/// Unit vector at `angle_deg` from `u0`, in the plane spanned by `u0` and a
/// second random direction.
fn direction_at_angle<R: Rng + ?Sized>(u0: &[f64], angle_deg: f64, rng: &mut R) -> Vec<f64> {
    if u0.len() == 1 {
        return u0.to_vec();
    }
    let mut w: Vec<f64>;
    loop {
        w = random_direction(u0.len(), rng);
        let c = dot(&w, u0);
        w.iter_mut().zip(u0).for_each(|(a, &b)| *a -= c * b);
        if normalize(&mut w) > 1e-8 {
            break;
        }
    }
    let th = angle_deg.to_radians();
    u0.iter()
        .zip(&w)
        .map(|(&a, &b)| th.cos() * a + th.sin() * b)
        .collect()
}

/// `m` rows of `N(center, I/10)`.
fn tight_cluster<R: Rng + ?Sized>(center: &[f64], m: usize, rng: &mut R, out: &mut Vec<f64>) {
    let s = 0.1f64.sqrt();
    for _ in 0..m {
        out.extend(center.iter().map(|&c| c + s * normal(rng)));
    }
}

fn two_cluster_rows<R: Rng + ?Sized>(
    mu: &[f64],
    m: usize,
    r0: f64,
    r1: f64,
    angle_deg: f64,
    rng: &mut R,
    out: &mut Vec<f64>,
) {
    let u0: Vec<f64> = random_direction(mu.len(), rng);
    let u1 = direction_at_angle(&u0, angle_deg, rng);
    let m0 = (0.7 * m as f64).round() as usize;
    let c0: Vec<f64> = mu.iter().zip(&u0).map(|(&a, &u)| a + r0 * u).collect();
    let c1: Vec<f64> = mu.iter().zip(&u1).map(|(&a, &u)| a + r1 * u).collect();
    tight_cluster(&c0, m0, rng, out);
    tight_cluster(&c1, m - m0, rng, out);
}

fn outlier_rows<R: Rng + ?Sized>(
    kind: NoiseKind,
    inliers: &InlierSpec,
    mu: &[f64],
    m: usize,
    rng: &mut R,
    out: &mut Vec<f64>,
) -> Result<()> {
    let d = mu.len();
    let sigma = spherical_sigma(inliers);
    let sqrt_d = (d as f64).sqrt();
    match kind {
        NoiseKind::VarianceShell => {
            let center: Vec<f64> = match inliers.diag_variances(d) {
                Some(var) if is_diag(inliers) => {
                    mu.iter().zip(&var).map(|(&a, &v)| a + v).collect()
                }
                _ => {
                    let u: Vec<f64> = random_direction(d, rng);
                    mu.iter()
                        .zip(&u)
                        .map(|(&a, &uj)| a + sigma * sqrt_d * uj)
                        .collect()
                }
            };
            tight_cluster(&center, m, rng, out);
        }
        NoiseKind::TwoClusters { angle_deg } => {
            if is_diag(inliers) {
                return Err(invalid(
                    "two_clusters noise is not defined for diagonal inliers",
                ));
            }
            let r = sigma * sqrt_d;
            two_cluster_rows(mu, m, r, r, angle_deg, rng, out);
        }
        NoiseKind::Dkk => {
            if is_diag(inliers) {
                return Err(invalid("dkk noise is not defined for diagonal inliers"));
            }
            let half = m.div_ceil(2);
            for _ in 0..half {
                out.extend(
                    mu.iter()
                        .map(|&a| if rng.random::<bool>() { a - sigma } else { a }),
                );
            }
            for _ in half..m {
                for (j, &a) in mu.iter().enumerate() {
                    let off = match j {
                        0 => {
                            if rng.random::<bool>() {
                                11.0
                            } else {
                                -1.0
                            }
                        }
                        1 => {
                            if rng.random::<bool>() {
                                -3.0
                            } else {
                                -1.0
                            }
                        }
                        _ => -1.0,
                    };
                    out.push(a + sigma * off);
                }
            }
        }
        NoiseKind::UniformInDist => {
            let width: Vec<f64> = match inliers.diag_variances(d) {
                Some(var) if is_diag(inliers) => var,
                _ => vec![2.0 * sigma; d],
            };
            for _ in 0..m {
                for (&a, &w) in mu.iter().zip(&width) {
                    out.push(a + w * rng.random::<f64>());
                }
            }
        }
        NoiseKind::LargeOutliers => {
            let s = match inliers.diag_variances(d) {
                Some(var) => (var.iter().sum::<f64>() / d as f64).sqrt(),
                None => 1.0,
            };
            two_cluster_rows(mu, m, 10.0 * s * sqrt_d, 20.0 * s * sqrt_d, 75.0, rng, out);
        }
        NoiseKind::Mix { subtle } => {
            let large = m.div_ceil(2);
            outlier_rows(NoiseKind::LargeOutliers, inliers, mu, large, rng, out)?;
            let subtle = match subtle {
                SubtleKind::VarianceShell => NoiseKind::VarianceShell,
                SubtleKind::Dkk => NoiseKind::Dkk,
            };
            outlier_rows(subtle, inliers, mu, m - large, rng, out)?;
        }
        NoiseKind::Subtractive => {
            return Err(invalid(
                "subtractive noise removes points and has no outlier distribution",
            ));
        }
    }
    Ok(())
}

/// `m` rows from the corruption distribution `Q` around the inlier mean `mu`.
pub fn generate_outliers<T: Real, R: Rng + ?Sized>(
    noise: &NoiseSpec,
    inliers: &InlierSpec,
    mu: &[f64],
    m: usize,
    rng: &mut R,
) -> Result<Matrix<T>> {
    let mut out = Vec::with_capacity(m * mu.len());
    outlier_rows(noise.kind, inliers, mu, m, rng, &mut out)?;
    Ok(from_f64(m, mu.len(), out))
}

/// Remove the `⌈ηn⌉` points with the largest projection on `u`, ties removing
/// the lower index first. Returns the survivors and the removed indices
/// (ascending).
pub fn apply_subtractive_along<T: Real>(
    x: &Matrix<T>,
    eta: f64,
    u: &[T],
) -> Result<(Matrix<T>, Vec<usize>)> {
    let n = x.rows();
    let m = outlier_count(eta, n);
    if m >= n {
        return Err(invalid(format!(
            "subtractive noise would remove all {n} points"
        )));
    }
    let proj = x.matvec(u);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        proj[b]
            .partial_cmp(&proj[a])
            .expect("finite projections")
            .then(a.cmp(&b))
    });
    let mut removed = order[..m].to_vec();
    removed.sort_unstable();
    let kept: Vec<usize> = (0..n)
        .filter(|i| removed.binary_search(i).is_err())
        .collect();
    Ok((x.select_rows(&kept), removed))
}

/// [`apply_subtractive_along`] a uniformly random direction.
pub fn apply_subtractive<T: Real, R: Rng + ?Sized>(
    x: &Matrix<T>,
    eta: f64,
    rng: &mut R,
) -> Result<(Matrix<T>, Vec<usize>)> {
    let u: Vec<T> = random_direction::<T, R>(x.cols(), rng);
    apply_subtractive_along(x, eta, &u)
}

/// A corrupted sample with everything needed to score an estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialDataset<T> {
    pub data: Matrix<T>,
    pub inlier_mask: Vec<bool>,
    pub true_mean: Vec<T>,
    /// Mean of the uncorrupted sample before corruption (for subtractive noise,
    /// before removal).
    pub good_mean: Vec<T>,
    pub rng_seed: u64,
}

impl<T: Real> TrialDataset<T> {
    pub fn inlier_count(&self) -> usize {
        self.inlier_mask.iter().filter(|&&b| b).count()
    }
}

fn apply_rotation<T: Real>(q: &Matrix<T>, x: &Matrix<T>) -> Matrix<T> {
    // rows are points: x Qᵀ
    x.matmul(&q.transpose()).expect("square rotation")
}

/// Draw a full trial from `seed`. Inliers are drawn first, then the outliers,
/// then the row shuffle and finally the optional rotation.
pub fn assemble_trial<T: Real>(
    inliers: &InlierSpec,
    noise: &NoiseSpec,
    n: usize,
    d: usize,
    seed: u64,
    rotate: bool,
) -> Result<TrialDataset<T>> {
    noise.validate()?;
    if n == 0 || d == 0 {
        return Err(invalid("trial needs n >= 1 and d >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mu = inliers.true_mean(d);
    let m = outlier_count(noise.eta, n);
    let (data, mask, good_mean) = if noise.is_additive() {
        let good: Matrix<T> = generate_inliers(inliers, n - m, d, &mut rng)?;
        let bad: Matrix<T> = if m > 0 {
            generate_outliers(noise, inliers, &mu, m, &mut rng)?
        } else {
            Matrix::zeros(0, d)
        };
        let good_mean = column_mean(&good);
        let stacked = good.vstack(&bad)?;
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mask = order.iter().map(|&i| i < n - m).collect();
        (stacked.select_rows(&order), mask, good_mean)
    } else {
        let full: Matrix<T> = generate_inliers(inliers, n, d, &mut rng)?;
        let good_mean = column_mean(&full);
        let (kept, _) = apply_subtractive(&full, noise.eta, &mut rng)?;
        let mask = vec![true; kept.rows()];
        (kept, mask, good_mean)
    };
    let mut true_mean: Vec<T> = mu.into_iter().map(T::of).collect();
    let (data, good_mean) = if rotate {
        let q: Matrix<T> = random_orthogonal(d, &mut rng);
        true_mean = q.matvec(&true_mean);
        (apply_rotation(&q, &data), q.matvec(&good_mean))
    } else {
        (data, good_mean)
    };
    Ok(TrialDataset {
        data,
        inlier_mask: mask,
        true_mean,
        good_mean,
        rng_seed: seed,
    })
}

/// Mix externally supplied inlier and outlier matrices at rate `eta`.
///
/// `n` defaults to the number of inlier rows; `⌈ηn⌉` outliers and
/// `n − ⌈ηn⌉` inliers are sampled without replacement. The ground truth is
/// the mean of all supplied inlier rows.
pub fn mix_external<T: Real>(
    inliers: &Matrix<T>,
    outliers: &Matrix<T>,
    eta: f64,
    n: Option<usize>,
    seed: u64,
) -> Result<TrialDataset<T>> {
    if !(0.0..0.5).contains(&eta) {
        return Err(invalid(format!("eta must lie in [0, 0.5), got {eta}")));
    }
    inliers.check_samples()?;
    let d = inliers.cols();
    if outliers.rows() > 0 && outliers.cols() != d {
        return Err(crate::Error::DimensionMismatch {
            expected: d,
            got: outliers.cols(),
        });
    }
    let n = n.unwrap_or(inliers.rows());
    let m = outlier_count(eta, n);
    if n - m > inliers.rows() || m > outliers.rows() {
        return Err(invalid(format!(
            "need {} inlier and {m} outlier rows, have {} and {}",
            n - m,
            inliers.rows(),
            outliers.rows()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gi = sample(&mut rng, inliers.rows(), n - m).into_vec();
    let bi = sample(&mut rng, outliers.rows(), m).into_vec();
    let good = inliers.select_rows(&gi);
    let stacked = good.vstack(&outliers.select_rows(&bi))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    Ok(TrialDataset {
        data: stacked.select_rows(&order),
        inlier_mask: order.iter().map(|&i| i < n - m).collect(),
        true_mean: column_mean(inliers),
        good_mean: column_mean(&good),
        rng_seed: seed,
    })
}
