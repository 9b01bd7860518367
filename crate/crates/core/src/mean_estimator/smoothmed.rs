//! Monte-Carlo smoothed median along one direction.
//!
//! The smoothing vector `ξ` with `Cov(ξ) = β⁻¹·Gram` is realised as
//! `ξᵢ = ⟨xᵢ, g⟩/√β` with `g ~ N(0, I_d)`, so one draw costs `O(Nd)` and the
//! smoothed median becomes `E_g Med(⟨xᵢ, v + g/√β⟩)`. Draws come in antithetic
//! pairs `(g, −g)`, which makes the Monte-Carlo average exactly
//! translation-equivariant.

use serde::Serialize;

use crate::linalg::{dot, Matrix};
use crate::orderstats::median_in_place;
use crate::rng::{std_normal_vec, RngStream};
use crate::sample::Sample;
use crate::scalar::Real;

use super::net::SphereNet;

#[derive(Debug, Clone, Serialize)]
pub struct SmoothMedConfig<T: Real> {
    pub beta: u32,
    /// Monte-Carlo draws per direction; odd counts are rounded up to the next
    /// even number so draws pair up antithetically.
    pub mc_draws: usize,
    pub net: SphereNet<T>,
    pub seed: RngStream,
    /// Orthonormal frame applied to the standard Gaussian draws (`g = F z`).
    /// `None` means the identity. Co-rotating it with the data and the net
    /// makes the estimator exactly rotation-equivariant.
    #[serde(skip)]
    pub draw_frame: Option<Matrix<T>>,
}

impl<T: Real> SmoothMedConfig<T> {
    pub fn effective_draws(&self) -> usize {
        effective_draws(self.mc_draws)
    }
}

pub(crate) fn effective_draws(m: usize) -> usize {
    m.max(1).div_ceil(2) * 2
}

/// Smoothed median of the projections on `v`, using `cfg.seed` as the stream.
pub fn smooth_med<T: Real>(sample: &Sample<T>, v: &[T], cfg: &SmoothMedConfig<T>) -> T {
    smooth_med_stream(sample, v, cfg.beta, cfg.mc_draws, cfg.seed, cfg.draw_frame.as_ref())
}

pub(crate) fn smooth_med_stream<T: Real>(
    sample: &Sample<T>,
    v: &[T],
    beta: u32,
    mc_draws: usize,
    stream: RngStream,
    frame: Option<&Matrix<T>>,
) -> T {
    assert!(beta >= 1, "beta must be at least 1");
    assert!(!sample.is_empty(), "smoothed median of an empty sample");
    let d = sample.d();
    let n = sample.n();
    let pairs = effective_draws(mc_draws) / 2;
    let inv_sqrt_beta = T::from_u32(beta).expect("beta").sqrt().recip();
    let base = sample.project(v);
    let mut g = stream.generator();
    let mut noise = Vec::with_capacity(n);
    let mut buf = vec![T::zero(); n];
    let mut acc = Vec::with_capacity(2 * pairs);
    for _ in 0..pairs {
        let z: Vec<T> = std_normal_vec(&mut g, d);
        let dir: Vec<T> = match frame {
            Some(f) => f.matvec(&z),
            None => z,
        };
        let scaled: Vec<T> = dir.into_iter().map(|x| x * inv_sqrt_beta).collect();
        noise.clear();
        noise.extend(sample.rows().map(|r| dot(r, &scaled)));
        for (b, (&p, &e)) in buf.iter_mut().zip(base.iter().zip(&noise)) {
            *b = p + e;
        }
        let plus = median_in_place(&mut buf).expect("nonempty");
        for (b, (&p, &e)) in buf.iter_mut().zip(base.iter().zip(&noise)) {
            *b = p - e;
        }
        let minus = median_in_place(&mut buf).expect("nonempty");
        acc.push((plus + minus) * T::lit(0.5));
    }
    crate::scalar::mean(&acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{sample_gaussian, GaussianModel};
    use crate::mean_estimator::net::build_sphere_net;

    fn cfg(d: usize, beta: u32, m: usize, seed: u64) -> SmoothMedConfig<f64> {
        SmoothMedConfig {
            beta,
            mc_draws: m,
            net: build_sphere_net(d, 1.0, RngStream::new(0, 0)).unwrap(),
            seed: RngStream::new(seed, 0),
            draw_frame: None,
        }
    }

    #[test]
    fn identical_rows_give_exact_projection() {
        let x0 = vec![1.5, -2.0];
        let s = Sample::from_rows(&vec![x0.clone(); 11]).unwrap();
        let v = [0.6, 0.8];
        let got = smooth_med(&s, &v, &cfg(2, 2, 50, 3));
        assert!((got - dot(&x0, &v)).abs() < 1e-12);
    }

    #[test]
    fn antisymmetric_triple_is_zero() {
        let a = vec![0.3, 1.7];
        let s = Sample::from_rows(&[a.iter().map(|x| -x).collect(), vec![0.0, 0.0], a.clone()]).unwrap();
        for seed in 0..5 {
            assert_eq!(smooth_med(&s, &[1.0, 0.0], &cfg(2, 1, 40, seed)), 0.0);
        }
    }

    #[test]
    fn standard_normal_one_dimensional() {
        for seed in 0..5 {
            let s = sample_gaussian(&GaussianModel::standard(1), 1001, RngStream::new(100 + seed, 0)).unwrap();
            let got = smooth_med(&s, &[1.0], &cfg(1, 1, 500, seed));
            assert!(got.abs() <= 0.15, "seed {seed}: {got}");
        }
    }

    #[test]
    fn odd_draw_counts_round_up() {
        assert_eq!(effective_draws(1), 2);
        assert_eq!(effective_draws(199), 200);
        assert_eq!(effective_draws(200), 200);
    }
}
