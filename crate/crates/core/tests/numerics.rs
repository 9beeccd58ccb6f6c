use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use robust_mean::numerics::{
    center_and_covariance, erfc, full_sym_eigendecomposition, project_capped_simplex,
    random_orthogonal, scatter_spectrum, top_eigenpair, top_scatter_eigenpair, tridiagonal_eigen,
    Matrix, Normalization, EIGEN_MAX_ITER,
};
use robust_mean::thresholds::{legacy_threshold, low_n_threshold, theorem1_bound, ThresholdParams};

/// Cyclic Jacobi rotations; eigenvalues sorted descending.
fn jacobi_eigenvalues(a: &Matrix<f64>) -> Vec<f64> {
    let n = a.rows();
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut v: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    v
}

fn random_symmetric(n: usize, rng: &mut ChaCha8Rng) -> Matrix<f64> {
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v: f64 = rng.sample(StandardNormal);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    a
}

fn gaussian_matrix(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Matrix<f64> {
    let data = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
    Matrix::from_vec(n, d, data).unwrap()
}

#[test]
fn covariance_matches_triple_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let rows: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..3).map(|_| rng.random_range(-9..=9) as f64).collect())
        .collect();
    let x = Matrix::<f64>::from_f64_rows(&rows).unwrap();
    for norm in [Normalization::OverN, Normalization::OverNMinus1] {
        let c = center_and_covariance(&x, norm).unwrap();
        let div = match norm {
            Normalization::OverN => 4.0,
            Normalization::OverNMinus1 => 3.0,
        };
        let mean: Vec<f64> = (0..3)
            .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / 4.0)
            .collect();
        for j in 0..3 {
            for k in 0..3 {
                let mut s = 0.0;
                for r in &rows {
                    s += (r[j] - mean[j]) * (r[k] - mean[k]);
                }
                assert!((c.covariance[(j, k)] - s / div).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn full_decomposition_matches_jacobi() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = random_symmetric(6, &mut rng);
    let eig = full_sym_eigendecomposition(&a).unwrap();
    let oracle = jacobi_eigenvalues(&a);
    for (x, y) in eig.values.iter().zip(&oracle) {
        assert!((x - y).abs() < 1e-8, "{x} vs {y}");
    }
}

#[test]
fn full_decomposition_reconstructs() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = random_symmetric(8, &mut rng);
    let eig = full_sym_eigendecomposition(&a).unwrap();
    assert!(eig.reconstruct().max_abs_diff(&a) <= 1e-8);
    let vtv = eig.vectors.transpose().matmul(&eig.vectors).unwrap();
    assert!(vtv.max_abs_diff(&Matrix::identity(8)) <= 1e-10);
}

#[test]
fn tridiagonal_matches_jacobi() {
    let diag = [2.0, -1.0, 0.5, 3.0, 1.0];
    let off = [0.7, -0.2, 1.1, 0.4];
    let mut a = Matrix::from_diag(&diag);
    for (i, &o) in off.iter().enumerate() {
        a[(i, i + 1)] = o;
        a[(i + 1, i)] = o;
    }
    let eig = tridiagonal_eigen(&diag, &off).unwrap();
    for (x, y) in eig.values.iter().zip(jacobi_eigenvalues(&a)) {
        assert!((x - y).abs() < 1e-10);
    }
}

#[test]
fn scatter_spectrum_both_sides() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (n, d) in [(7, 4), (4, 7)] {
        let y = gaussian_matrix(n, d, &mut rng);
        let s = scatter_spectrum(&y, 2.0).unwrap();
        let dense = robust_mean::numerics::scatter(&y, 2.0);
        let oracle = jacobi_eigenvalues(&dense);
        assert_eq!(s.values.len(), n.min(d));
        for (x, o) in s.values.iter().zip(&oracle) {
            assert!((x - o).abs() < 1e-9);
        }
        let top = top_scatter_eigenpair(&y, 2.0, &mut rng).unwrap();
        assert!((top.value - oracle[0]).abs() < 1e-7);
        // coords are projections onto the eigenvectors
        let v = full_sym_eigendecomposition(&dense).unwrap().vector(0);
        for i in 0..n {
            let p: f64 = y.row(i).iter().zip(&v).map(|(a, b)| a * b).sum();
            assert!((s.coords[(i, 0)].abs() - p.abs()).abs() < 1e-8);
        }
    }
}

/// erfc from the Maclaurin series of erf (small x) or the Laplace continued
/// fraction (large x).
fn erfc_oracle(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc_oracle(-x);
    }
    if x < 2.5 {
        let mut term = x;
        let mut sum = x;
        let mut k = 0.0;
        loop {
            k += 1.0;
            term *= -x * x / k;
            let add = term / (2.0 * k + 1.0);
            sum += add;
            if add.abs() < 1e-18 {
                break;
            }
        }
        1.0 - 2.0 / std::f64::consts::PI.sqrt() * sum
    } else {
        // 1 / (x + (1/2) / (x + 1 / (x + (3/2) / (x + ...)))), bottom-up
        let mut f = 0.0;
        for k in (1..400).rev() {
            f = (k as f64 / 2.0) / (x + f);
        }
        let cf = 1.0 / (x + f);
        cf * (-x * x).exp() / std::f64::consts::PI.sqrt()
    }
}

#[test]
fn erfc_matches_series_and_fraction() {
    assert!((erfc(1.0f64) - 0.157_299_207_050_285_1).abs() < 1e-15);
    assert!((erfc_oracle(1.0) - 0.157_299_2).abs() < 1e-7);
    for i in -30..=60 {
        let x = i as f64 / 10.0;
        let (a, b) = (erfc(x), erfc_oracle(x));
        assert!(
            (a - b).abs() <= 1e-12 * b.max(1e-300) + 1e-15,
            "x={x}: {a} vs {b}"
        );
    }
    assert!((erfc(1.0f32) - 0.157_299_2f32).abs() < 1e-6);
}

#[test]
fn threshold_examples() {
    let p = ThresholdParams::new(500, 500, 10.0, 0.1);
    let expect = (2.0 + 10.0 / 500f64.sqrt()).powi(2);
    assert!((low_n_threshold(&p) - expect).abs() < 1e-12);
    assert!((low_n_threshold(&p) - 5.988_854).abs() < 1e-6);
    let p200 = ThresholdParams::new(200, 500, 10.0, 0.1);
    let expect = (1.0 + 2.5f64.sqrt() + 10.0 / 200f64.sqrt()).powi(2);
    assert!((low_n_threshold(&p200) - expect).abs() < 1e-12);
    let tail = (500.0 + 1000f64.sqrt() * 10.0 + 100.0).sqrt() / 500.0;
    let expect = (2.0 + 10.0 / 500f64.sqrt() + tail).powi(2);
    assert!((theorem1_bound(&p) - expect).abs() < 1e-12);
    assert!(
        (legacy_threshold(1.0 / std::f64::consts::E) - (1.0 + 3.0 / std::f64::consts::E)).abs()
            < 1e-12
    );
    assert!((legacy_threshold(0.1) - 1.690_775_527_898_213_7).abs() < 1e-12);
}

#[test]
fn simplex_two_point_example() {
    let w = project_capped_simplex(&[2.0f64, 0.0], 1.0).unwrap();
    assert!((w[0] - 1.0).abs() < 1e-12 && w[1].abs() < 1e-12);
}

#[test]
fn simplex_projection_beats_random_feasible_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for inst in 0..8 {
        let n = 2 + inst % 4;
        let cap = rng
            .random_range(1.0 / n as f64 + 0.02..0.9f64)
            .max(1.0 / n as f64 + 1e-3);
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.5)).collect();
        let p = project_capped_simplex(&w, cap).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert!(p.iter().all(|&v| v >= -1e-12 && v <= cap + 1e-12));
        let dist = |c: &[f64]| {
            c.iter()
                .zip(&w)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        };
        let best = dist(&p);
        let mut tried = 0;
        while tried < 100_000 / 8 {
            // uniform on the simplex via normalised exponentials, then reject
            let e: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().ln()).collect();
            let s: f64 = e.iter().sum();
            let c: Vec<f64> = e.iter().map(|v| v / s).collect();
            if c.iter().any(|&v| v > cap) {
                continue;
            }
            tried += 1;
            assert!(best <= dist(&c) + 1e-12, "candidate {c:?} beats {p:?}");
        }
    }
}

#[test]
fn random_orthogonal_first_column_is_centered() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let d = 5;
    let mut acc = vec![0.0; d];
    let draws = 10_000;
    for _ in 0..draws {
        let q: Matrix<f64> = random_orthogonal(d, &mut rng);
        for (a, v) in acc.iter_mut().zip(q.col(0)) {
            *a += v;
        }
    }
    for a in acc {
        assert!((a / draws as f64).abs() <= 0.05);
    }
}

#[test]
fn rotation_preserves_norms_and_spectrum() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let d = 6;
    let q: Matrix<f64> = random_orthogonal(d, &mut rng);
    assert!(
        q.transpose()
            .matmul(&q)
            .unwrap()
            .max_abs_diff(&Matrix::identity(d))
            < 1e-12
    );
    let x = gaussian_matrix(20, d, &mut rng);
    let xr = x.matmul(&q.transpose()).unwrap();
    for i in 0..20 {
        let a: f64 = x.row(i).iter().map(|v| v * v).sum();
        let b: f64 = xr.row(i).iter().map(|v| v * v).sum();
        assert!((a - b).abs() < 1e-10);
    }
    let s = center_and_covariance(&x, Normalization::OverN)
        .unwrap()
        .covariance;
    let sr = q.transpose().matmul(&s).unwrap().matmul(&q).unwrap();
    for (a, b) in jacobi_eigenvalues(&s).iter().zip(jacobi_eigenvalues(&sr)) {
        assert!((a - b).abs() < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn covariance_trace_identity(seed in any::<u64>(), n in 2usize..12, d in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = gaussian_matrix(n, d, &mut rng).map(|v| 3.0 * v + 1.0);
        let c = center_and_covariance(&x, Normalization::OverN).unwrap();
        let tr: f64 = (0..d).map(|j| c.covariance[(j, j)]).sum();
        let direct: f64 = (0..n)
            .map(|i| x.row(i).iter().zip(&c.mean).map(|(a, m)| (a - m) * (a - m)).sum::<f64>())
            .sum::<f64>() / n as f64;
        prop_assert!((tr - direct).abs() <= 1e-12 * direct.max(1.0));
    }

    #[test]
    fn top_eigenpair_matches_dense(seed in any::<u64>(), d in 1usize..=50) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_symmetric(d, &mut rng);
        let dense = full_sym_eigendecomposition(&a).unwrap();
        // shift so the top eigenvalue is also the largest in magnitude
        let shift = dense.values.iter().fold(0.0f64, |m, v| m.max(v.abs())) + 1.0;
        let mut b = a.clone();
        for i in 0..d {
            b[(i, i)] += shift;
        }
        let top = top_eigenpair(&b, 1e-10, EIGEN_MAX_ITER, &mut rng).unwrap();
        prop_assert!((top.value - shift - dense.values[0]).abs() <= 1e-6 * shift.max(1.0));
    }

    #[test]
    fn low_n_threshold_at_least_one(n in 2usize..5000, d in 1usize..5000, t in 1e-6f64..100.0) {
        prop_assert!(low_n_threshold(&ThresholdParams::new(n, d, t, 0.1)) >= 1.0);
    }

    #[test]
    fn simplex_projection_is_a_projection(seed in any::<u64>(), n in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cap = rng.random_range(1.0 / n as f64..=1.0);
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let p = project_capped_simplex(&w, cap).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        prop_assert!(p.iter().all(|&v| v >= -1e-12 && v <= cap + 1e-12));
        let again = project_capped_simplex(&p, cap).unwrap();
        for (a, b) in p.iter().zip(&again) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }
}
