//! Smoothed-median mean estimator.
//!
//! For every direction `v` of a sphere net the smoothed median `m_v` of the
//! projections is estimated by Monte Carlo; the estimate is the point `ν̂`
//! minimising `max_v |m_v − ⟨ν, v⟩|`.

mod chebyshev;
mod net;
mod smoothmed;

pub use chebyshev::{chebyshev_center, default_tolerance, minmax_objective, ChebyshevSolution};
pub use net::{build_sphere_net, build_sphere_net_capped, default_net, SphereNet, DEFAULT_MAX_NET_SIZE};
pub use smoothmed::{smooth_med, SmoothMedConfig};

use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::mad_normal_constant;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::orderstats::mad_in_place;
use crate::report::{EstimatorReport, ReportDetails};
use crate::rng::RngStream;
use crate::sample::Sample;
use crate::scalar::Real;

/// Largest contamination level the engine accepts.
pub const MAX_EPS: f64 = 0.25;
pub const DEFAULT_MC_DRAWS: usize = 200;
pub const MIN_TUNING_SAMPLES: usize = 20;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BetaTuning<T: Real> {
    pub beta: u32,
    /// `Σ_j (MAD_j / Φ⁻¹(3/4))²`, a robust trace proxy.
    pub tau_hat: T,
    /// `max_v (MAD⟨x, v⟩ / Φ⁻¹(3/4))²`, a robust operator-norm proxy.
    pub omega_hat: T,
}

/// `β = max(1, round(τ̂/ω̂))` from MAD-based trace and operator-norm proxies.
/// `eps` and `delta` describe the regime the guarantee is stated for; the
/// proxies themselves do not depend on them.
pub fn tune_beta_mean<T: Real>(sample: &Sample<T>, eps: T, delta: T, net: &SphereNet<T>) -> Result<BetaTuning<T>> {
    if sample.n() < MIN_TUNING_SAMPLES {
        return Err(Error::InsufficientData { needed: MIN_TUNING_SAMPLES, got: sample.n() });
    }
    check_eps_delta(eps, delta)?;
    let c = mad_normal_constant::<T>();
    let mut tau_hat = T::zero();
    for j in 0..sample.d() {
        let mut col = sample.column(j);
        let s = mad_in_place(&mut col)? / c;
        tau_hat = tau_hat + s * s;
    }
    let omega_hat = crate::tuning::mad_opnorm(sample, net);
    if omega_hat <= T::zero() || tau_hat <= T::zero() {
        return Err(Error::RankDegenerate("all MADs are zero".into()));
    }
    let ratio = (tau_hat / omega_hat).round().max(T::one());
    let beta = ratio.to_u32().unwrap_or(u32::MAX);
    Ok(BetaTuning { beta, tau_hat, omega_hat })
}

fn check_eps_delta<T: Real>(eps: T, delta: T) -> Result<()> {
    if !(eps >= T::zero() && eps < T::lit(MAX_EPS)) {
        return Err(Error::Domain(format!("eps {eps} outside [0, {MAX_EPS})")));
    }
    if !(delta > T::zero() && delta < T::one()) {
        return Err(Error::Domain(format!("delta {delta} outside (0, 1)")));
    }
    Ok(())
}

/// Knobs of [`estimate_mean`]; every `None` is tuned or defaulted.
#[derive(Debug, Clone)]
pub struct MeanOptions<T: Real> {
    pub beta: Option<u32>,
    pub mc_draws: usize,
    pub net: Option<SphereNet<T>>,
    pub seed: RngStream,
    pub draw_frame: Option<Matrix<T>>,
    /// Chebyshev solver tolerance; `None` uses `1e−6·(1 + max|m_v|)`.
    pub tol: Option<T>,
}

impl<T: Real> Default for MeanOptions<T> {
    fn default() -> Self {
        Self { beta: None, mc_draws: DEFAULT_MC_DRAWS, net: None, seed: RngStream::new(0, 0), draw_frame: None, tol: None }
    }
}

impl<T: Real> From<SmoothMedConfig<T>> for MeanOptions<T> {
    fn from(cfg: SmoothMedConfig<T>) -> Self {
        Self {
            beta: Some(cfg.beta),
            mc_draws: cfg.mc_draws,
            net: Some(cfg.net),
            seed: cfg.seed,
            draw_frame: cfg.draw_frame,
            tol: None,
        }
    }
}

/// Smoothed median along every net direction; direction `i` uses the
/// sub-stream `seed.child(i)`.
pub fn directional_smooth_medians<T: Real>(
    sample: &Sample<T>,
    net: &SphereNet<T>,
    beta: u32,
    mc_draws: usize,
    seed: RngStream,
    frame: Option<&Matrix<T>>,
) -> Vec<T> {
    (0..net.len())
        .into_par_iter()
        .map(|i| smoothmed::smooth_med_stream(sample, net.get(i), beta, mc_draws, seed.child(i as u64), frame))
        .collect()
}

pub fn estimate_mean<T: Real>(
    contaminated: &Sample<T>,
    eps: T,
    delta: T,
    opts: &MeanOptions<T>,
) -> Result<(Vec<T>, EstimatorReport<T>)> {
    check_eps_delta(eps, delta)?;
    if contaminated.is_empty() {
        return Err(Error::Domain("empty sample".into()));
    }
    let d = contaminated.d();
    let net = match &opts.net {
        Some(net) => {
            if net.dim() != d {
                return Err(Error::Dimension { expected: d, got: net.dim() });
            }
            net.clone()
        }
        None => default_net(d, opts.seed.child(u64::MAX))?,
    };
    if opts.mc_draws == 0 {
        return Err(Error::Domain("mc_draws must be at least 1".into()));
    }
    let (beta, tau_hat, omega_hat) = match opts.beta {
        Some(0) => return Err(Error::Domain("beta must be at least 1".into())),
        Some(b) => (b, None, None),
        None => {
            let t = tune_beta_mean(contaminated, eps, delta, &net)?;
            (t.beta, Some(t.tau_hat), Some(t.omega_hat))
        }
    };
    let values = directional_smooth_medians(contaminated, &net, beta, opts.mc_draws, opts.seed, opts.draw_frame.as_ref());
    let tol = opts.tol.unwrap_or_else(|| default_tolerance(&values));
    let sol = chebyshev_center(&net, &values, tol)?;
    let report = EstimatorReport {
        objective: sol.objective,
        iterations: sol.pivots,
        mc_draws: smoothmed::effective_draws(opts.mc_draws),
        seed: opts.seed,
        beta,
        net_size: net.len(),
        details: ReportDetails::SmoothedMedian {
            estimate: sol.center.clone(),
            direction_values: values,
            dual_objective: sol.dual_objective,
            restart_best: sol.restart_best,
            tau_hat,
            omega_hat,
        },
    };
    Ok((sol.center, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{sample_gaussian, GaussianModel};
    use crate::linalg::{norm, SpdMatrix};

    #[test]
    fn beta_for_isotropic_sample() {
        let s = sample_gaussian(&GaussianModel::<f64>::standard(4), 4000, RngStream::new(1, 0)).unwrap();
        let net = build_sphere_net(4, 0.75, RngStream::new(2, 0)).unwrap();
        let t = tune_beta_mean(&s, 0.0, 0.05, &net).unwrap();
        assert!((1..=8).contains(&t.beta), "beta {}", t.beta);
    }

    #[test]
    fn beta_for_spiked_covariance() {
        let model = GaussianModel::from_spd(vec![0.0; 3], SpdMatrix::diag(&[100.0, 1.0, 1.0]).unwrap()).unwrap();
        let net = build_sphere_net(3, 0.5, RngStream::new(3, 0)).unwrap();
        let ones = (0..100)
            .filter(|&t| {
                let s = sample_gaussian(&model, 1000, RngStream::new(40 + t, 0)).unwrap();
                tune_beta_mean(&s, 0.0, 0.05, &net).unwrap().beta == 1
            })
            .count();
        assert!(ones >= 95, "{ones}/100");
    }

    #[test]
    fn identical_rows_are_rank_degenerate() {
        let s = Sample::from_rows(&vec![vec![1.0, 2.0]; 30]).unwrap();
        let net = build_sphere_net(2, 0.5, RngStream::new(0, 0)).unwrap();
        assert!(matches!(tune_beta_mean(&s, 0.0, 0.05, &net), Err(Error::RankDegenerate(_))));
        let small = Sample::from_rows(&vec![vec![1.0, 2.0]; 5]).unwrap();
        assert!(matches!(tune_beta_mean(&small, 0.0, 0.05, &net), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn eps_guard() {
        let s = sample_gaussian(&GaussianModel::<f64>::standard(2), 100, RngStream::new(1, 0)).unwrap();
        assert!(estimate_mean(&s, 0.25, 0.05, &MeanOptions::default()).is_err());
    }

    #[test]
    fn translation_equivariance_exact_up_to_roundoff() {
        let s = sample_gaussian(&GaussianModel::<f64>::standard(2), 201, RngStream::new(7, 0)).unwrap();
        let opts = MeanOptions { mc_draws: 20, net: Some(build_sphere_net(2, 0.2, RngStream::new(0, 0)).unwrap()), ..Default::default() };
        let (mu, _) = estimate_mean(&s, 0.0, 0.05, &opts).unwrap();
        let b = [3.0, -1.25];
        let (mu_b, _) = estimate_mean(&s.translated(&b), 0.0, 0.05, &opts).unwrap();
        assert!((mu_b[0] - mu[0] - b[0]).abs() < 1e-9 && (mu_b[1] - mu[1] - b[1]).abs() < 1e-9);
        assert!(norm(&mu) < 0.5);
    }
}
