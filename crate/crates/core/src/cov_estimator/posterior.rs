//! Gaussian `N(v, β⁻¹I)` truncated to the ellipsoid `‖G^{1/2}(θ − v)‖ ≤ r`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{norm, Matrix, SpdMatrix};
use crate::rng::{std_normal_vec, RngStream};
use crate::scalar::Real;

/// Smallest acceptance rate tolerated before the parameters are rejected.
pub const MIN_ACCEPTANCE: f64 = 0.1;
/// Proposals allowed per requested draw.
pub const PROPOSALS_PER_DRAW: usize = 20;

#[derive(Debug, Clone, Serialize)]
pub struct TruncatedPosteriorParams<T: Real> {
    pub beta: u32,
    pub g: SpdMatrix<T>,
    pub omega: T,
    /// `100·√ω`.
    pub radius: T,
    pub center: Vec<T>,
}

impl<T: Real> TruncatedPosteriorParams<T> {
    /// Checks `r² ≥ 20·τ̂/β` with the supplied trace proxy `tau_hat`.
    pub fn new(beta: u32, g: SpdMatrix<T>, omega: T, center: Vec<T>, tau_hat: T) -> Result<Self> {
        if beta == 0 {
            return Err(Error::Domain("beta must be at least 1".into()));
        }
        if !(omega > T::zero()) || !omega.is_finite() {
            return Err(Error::Domain(format!("omega {omega} must be positive")));
        }
        if g.dim() != center.len() {
            return Err(Error::Dimension { expected: g.dim(), got: center.len() });
        }
        check_unit(&center)?;
        let radius = T::lit(100.0) * omega.sqrt();
        let bound = T::lit(20.0) * tau_hat / T::from_u32(beta).expect("beta");
        if radius * radius < bound {
            return Err(Error::InadmissibleParams(format!(
                "radius² = {} is below 20·tau/beta = {bound}",
                radius * radius
            )));
        }
        Ok(Self { beta, g, omega, radius, center })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn with_center(&self, center: &[T]) -> Result<Self> {
        if center.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: center.len() });
        }
        check_unit(center)?;
        Ok(Self { center: center.to_vec(), ..self.clone() })
    }
}

fn check_unit<T: Real>(v: &[T]) -> Result<()> {
    let n = norm(v);
    if (n - T::one()).abs() > T::lit(1e-6) {
        return Err(Error::Domain(format!("center has norm {n}, expected a unit vector")));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct PosteriorDraws<T> {
    pub draws: Vec<Vec<T>>,
    pub proposals: usize,
    pub acceptance_rate: T,
}

/// Rejection sampler: propose `θ = v + z/√β` and keep it when
/// `(θ − v)ᵀG(θ − v) ≤ r²`.
pub fn sample_posterior<T: Real>(
    params: &TruncatedPosteriorParams<T>,
    m: usize,
    stream: RngStream,
) -> Result<PosteriorDraws<T>> {
    sample_posterior_framed(params, m, stream, None)
}

/// [`sample_posterior`] with the Gaussian proposals expressed in the
/// orthonormal frame `F` (`z ↦ F z`).
pub fn sample_posterior_framed<T: Real>(
    params: &TruncatedPosteriorParams<T>,
    m: usize,
    stream: RngStream,
    frame: Option<&Matrix<T>>,
) -> Result<PosteriorDraws<T>> {
    if m == 0 {
        return Err(Error::Domain("at least one draw is required".into()));
    }
    let d = params.dim();
    let inv_sqrt_beta = T::from_u32(params.beta).expect("beta").sqrt().recip();
    let r2 = params.radius * params.radius;
    let cap = PROPOSALS_PER_DRAW * m;
    let mut rng = stream.generator();
    let mut draws = Vec::with_capacity(m);
    let mut proposals = 0;
    while draws.len() < m && proposals < cap {
        proposals += 1;
        let mut w: Vec<T> = std_normal_vec::<T, _>(&mut rng, d).into_iter().map(|z| z * inv_sqrt_beta).collect();
        if let Some(f) = frame {
            w = f.matvec(&w);
        }
        if params.g.quad_form(&w) <= r2 {
            draws.push(params.center.iter().zip(&w).map(|(&c, &x)| c + x).collect());
        }
    }
    let rate = T::from_count(draws.len()) / T::from_count(proposals);
    if draws.len() < m || rate < T::lit(MIN_ACCEPTANCE) {
        return Err(Error::InadmissibleParams(format!(
            "acceptance rate {rate} after {proposals} proposals ({} of {m} draws accepted)",
            draws.len()
        )));
    }
    Ok(PosteriorDraws { draws, proposals, acceptance_rate: rate })
}

/// `(1/m) Σ (θ − v)(θ − v)ᵀ` over the draws.
pub fn centered_second_moment<T: Real>(draws: &[Vec<T>], center: &[T]) -> Matrix<T> {
    let d = center.len();
    let mut acc = Matrix::zeros(d, d);
    let mut diff = vec![T::zero(); d];
    for th in draws {
        for (x, (&t, &c)) in diff.iter_mut().zip(th.iter().zip(center)) {
            *x = t - c;
        }
        for i in 0..d {
            for j in i..d {
                acc[(i, j)] = acc[(i, j)] + diff[i] * diff[j];
            }
        }
    }
    let m = T::from_count(draws.len().max(1));
    for i in 0..d {
        for j in i..d {
            let x = acc[(i, j)] / m;
            acc[(i, j)] = x;
            acc[(j, i)] = x;
        }
    }
    acc
}

/// Monte-Carlo estimate of `H = E(θ − v)(θ − v)ᵀ`, together with the
/// acceptance rate of the sampler that produced it.
pub fn estimate_h_with_rate<T: Real>(
    params: &TruncatedPosteriorParams<T>,
    m: usize,
    stream: RngStream,
    frame: Option<&Matrix<T>>,
) -> Result<(SpdMatrix<T>, T)> {
    let out = sample_posterior_framed(params, m, stream, frame)?;
    let h = SpdMatrix::psd_projection(&centered_second_moment(&out.draws, &params.center));
    Ok((h, out.acceptance_rate))
}

pub fn estimate_h<T: Real>(params: &TruncatedPosteriorParams<T>, m: usize, stream: RngStream) -> Result<SpdMatrix<T>> {
    estimate_h_with_rate(params, m, stream, None).map(|(h, _)| h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{sample_gaussian, GaussianModel};
    use crate::mean_estimator::build_sphere_net;
    use crate::tuning::tune;

    fn e(d: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        v
    }

    fn admissible(seed: u64) -> TruncatedPosteriorParams<f64> {
        let s = sample_gaussian(&GaussianModel::standard(4), 2000, RngStream::new(seed, 0)).unwrap();
        let net = build_sphere_net(4, 0.75, RngStream::new(seed, 1)).unwrap();
        let t = tune(&s, 0.0, &net).unwrap();
        TruncatedPosteriorParams::new(4, t.g, t.omega, e(4, 0), t.tau).unwrap()
    }

    #[test]
    fn zero_g_accepts_everything() {
        let p = TruncatedPosteriorParams::new(2, SpdMatrix::zeros(3), 1.0, e(3, 1), 1.0).unwrap();
        let out = sample_posterior(&p, 500, RngStream::new(1, 0)).unwrap();
        assert_eq!(out.acceptance_rate, 1.0);
        assert_eq!(out.proposals, 500);
    }

    #[test]
    fn admissible_setup_accepts_half() {
        let p = admissible(3);
        let out = sample_posterior(&p, 10_000, RngStream::new(4, 0)).unwrap();
        assert!(out.acceptance_rate >= 0.45, "{}", out.acceptance_rate);
        let m = out.draws.len() as f64;
        for k in 0..4 {
            let mean: f64 = out.draws.iter().map(|t| t[k]).sum::<f64>() / m;
            assert!((mean - p.center[k]).abs() <= 0.05, "coordinate {k}: {mean}");
        }
    }

    #[test]
    fn inadmissible_radius_is_rejected() {
        let r = TruncatedPosteriorParams::new(1, SpdMatrix::identity(2), 1e-6, e(2, 0), 10.0);
        assert!(matches!(r, Err(Error::InadmissibleParams(_))));
    }

    #[test]
    fn low_acceptance_is_an_error() {
        // tau_hat understated so construction passes while G is huge.
        let g = SpdMatrix::identity(3).scale(1e8);
        let p = TruncatedPosteriorParams::new(1, g, 1e-4, e(3, 0), 0.0).unwrap();
        assert!(matches!(sample_posterior(&p, 50, RngStream::new(0, 0)), Err(Error::InadmissibleParams(_))));
    }

    #[test]
    fn untruncated_h_is_scaled_identity() {
        let beta = 4;
        let p = TruncatedPosteriorParams::new(beta, SpdMatrix::zeros(3), 1.0, e(3, 0), 1.0).unwrap();
        let h = estimate_h(&p, 100_000, RngStream::new(5, 0)).unwrap();
        let diff = h.matrix().sub(&Matrix::identity(3).scale(0.25)).sym_op_norm();
        assert!(diff <= 0.05 * 0.25, "{diff}");
    }

    #[test]
    fn h_does_not_depend_on_center() {
        let p = admissible(6);
        let m = 20_000;
        let h1 = estimate_h(&p, m, RngStream::new(7, 0)).unwrap();
        let h2 = estimate_h(&p.with_center(&e(4, 1)).unwrap(), m, RngStream::new(8, 0)).unwrap();
        let tol = 5.0 / (p.beta as f64 * (m as f64).sqrt());
        assert!(h1.matrix().sub(h2.matrix()).sym_op_norm() <= 3.0 * tol);
        let ev = h1.eigen().values.clone();
        assert!(ev[0] > 0.0 && *ev.last().unwrap() <= 2.0 / p.beta as f64 + tol, "{ev:?}");
        // Same stream: the offsets θ − v coincide exactly.
        let h3 = estimate_h(&p.with_center(&e(4, 2)).unwrap(), m, RngStream::new(7, 0)).unwrap();
        assert!(h1.matrix().sub(h3.matrix()).max_abs() <= 1e-12);
    }

    #[test]
    fn draws_satisfy_quadratic_bound() {
        let p = admissible(9);
        let out = sample_posterior(&p, 5000, RngStream::new(10, 0)).unwrap();
        let bound = 2.0 + 20.0 * p.radius * p.radius;
        assert!(out.draws.iter().all(|t| t.iter().map(|x| x * x).sum::<f64>() <= bound));
    }
}
