//! Robust mean and covariance estimation for Gaussian data under strong
//! contamination.
//!
//! The mean estimator takes a Chebyshev center of Monte-Carlo smoothed
//! medians over a sphere net; the covariance estimator matches medians of
//! `|⟨X, θ⟩|` against `Φ⁻¹(3/4)·√(θᵀΓθ)` over truncated-Gaussian draws `θ`.
//! Everything is generic over the scalar type ([`Real`], implemented for
//! `f32` and `f64`); the crate root re-exports `f64` aliases.

pub mod baselines;
pub mod contamination;
pub mod cov_estimator;
pub mod distributions;
pub mod error;
pub mod linalg;
pub mod mean_estimator;
pub mod orderstats;
pub mod report;
pub mod rng;
pub mod sample;
pub mod scalar;
pub mod tuning;

pub use error::{Error, Result};
pub use rng::RngStream;
pub use scalar::Real;

pub type Matrix = linalg::Matrix<f64>;
pub type SpdMatrix = linalg::SpdMatrix<f64>;
pub type Sample = sample::Sample<f64>;
pub type GaussianModel = distributions::GaussianModel<f64>;
pub type SphereNet = mean_estimator::SphereNet<f64>;
pub type AdversarySpec = contamination::AdversarySpec<f64>;
pub type AdversaryKind = contamination::AdversaryKind<f64>;
pub type MeanOptions = mean_estimator::MeanOptions<f64>;
pub type CovOptions = cov_estimator::CovOptions<f64>;
pub type CovParams = cov_estimator::CovParams<f64>;
pub type TunedParams = tuning::TunedParams<f64>;
pub type EstimatorReport = report::EstimatorReport<f64>;
