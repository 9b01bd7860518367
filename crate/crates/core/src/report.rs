use serde::Serialize;

use crate::linalg::SpdMatrix;
use crate::rng::RngStream;
use crate::scalar::Real;

/// Estimate plus the diagnostics needed to audit a run.
#[derive(Debug, Clone, Serialize)]
pub struct EstimatorReport<T: Real> {
    /// Min-max objective at the returned estimate.
    pub objective: T,
    pub iterations: usize,
    pub mc_draws: usize,
    pub seed: RngStream,
    pub beta: u32,
    pub net_size: usize,
    pub details: ReportDetails<T>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "estimator", rename_all = "snake_case")]
pub enum ReportDetails<T: Real> {
    SmoothedMedian {
        estimate: Vec<T>,
        /// Smoothed median per net direction, in net order.
        direction_values: Vec<T>,
        dual_objective: T,
        restart_best: T,
        tau_hat: Option<T>,
        omega_hat: Option<T>,
    },
    TruncatedPosterior {
        estimate: SpdMatrix<T>,
        omega: T,
        alpha: T,
        tau_hat: T,
        acceptance_rate: T,
        slack: T,
        /// Best objective after each iteration of the winning restart.
        objective_trace: Vec<T>,
        restarts: Vec<RestartSummary<T>>,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct RestartSummary<T: Real> {
    pub restart: usize,
    pub initial_objective: T,
    pub final_objective: T,
    pub iterations: usize,
}
