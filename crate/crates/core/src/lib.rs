//! Robust mean estimation in high dimensions.
//!
//! Given `n` samples in `R^d`, an unknown fraction of which may be
//! adversarial, estimate the mean of the inlier distribution. The crate
//! provides the estimators (spectral filtering, quantum-entropy scoring,
//! weighting and gradient methods, plus classical baselines), the synthetic
//! data generators used to benchmark them, a parallel sweep harness and a
//! small CLI.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the `*F64`
//! aliases below fix the usual double-precision choice.
//!
//! ```
//! use rand::SeedableRng;
//! use robust_mean::estimators::{estimate, EstimatorSpec};
//! use robust_mean::DataMatrixF64;
//!
//! let x = DataMatrixF64::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
//! let spec = EstimatorSpec::from_name("sample_mean").unwrap();
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
//! let report = estimate(&x, &spec, &mut rng).unwrap();
//! assert_eq!(report.mean, vec![2.0, 3.0]);
//! ```

pub mod cli;
pub mod datagen;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod numerics;
pub mod scalar;
pub mod thresholds;

pub use error::{Error, Result};
pub use scalar::Real;

pub type MatrixF64 = numerics::Matrix<f64>;
pub type DataMatrixF64 = numerics::DataMatrix<f64>;
pub type DataMatrixF32 = numerics::DataMatrix<f32>;
pub type EstimateReportF64 = estimators::EstimateReport<f64>;
pub type TrialDatasetF64 = datagen::TrialDataset<f64>;
