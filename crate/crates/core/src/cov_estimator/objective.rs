//! Sample-average objective
//! `max_v mean_j |Med(|⟨Xᵢ, θ_vj⟩|) − Φ⁻¹(3/4)·√(θ_vjᵀ Γ θ_vj)|`
//! over posterior draws `θ_vj` that stay fixed during optimisation.

use rayon::prelude::*;

use crate::distributions::mad_normal_constant;
use crate::linalg::Matrix;
use crate::orderstats::median_in_place;
use crate::sample::Sample;
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct FrozenObjective<T> {
    d: usize,
    /// Draws per direction, each flattened row-major.
    thetas: Vec<Vec<T>>,
    /// `Med_i |⟨Xᵢ, θ⟩|` for every draw.
    medians: Vec<Vec<T>>,
    c: T,
}

impl<T: Real> FrozenObjective<T> {
    /// `draws[v][j]` is the `j`-th posterior draw around net direction `v`.
    pub fn new(sample: &Sample<T>, draws: &[Vec<Vec<T>>]) -> Self {
        let d = sample.d();
        let medians = draws
            .par_iter()
            .map(|per| {
                let mut buf = Vec::with_capacity(sample.n());
                per.iter()
                    .map(|th| {
                        assert_eq!(th.len(), d, "draw dimension");
                        sample.project_into(th, &mut buf);
                        buf.iter_mut().for_each(|x| *x = x.abs());
                        median_in_place(&mut buf).expect("nonempty sample")
                    })
                    .collect()
            })
            .collect();
        let thetas = draws.iter().map(|per| per.iter().flatten().copied().collect()).collect();
        Self { d, thetas, medians, c: mad_normal_constant() }
    }

    pub fn directions(&self) -> usize {
        self.thetas.len()
    }

    fn draw(&self, v: usize, j: usize) -> &[T] {
        &self.thetas[v][j * self.d..(j + 1) * self.d]
    }

    pub fn direction_value(&self, v: usize, gamma: &Matrix<T>) -> T {
        let meds = &self.medians[v];
        let total = meds
            .iter()
            .enumerate()
            .map(|(j, &m)| (m - self.c * gamma.quad_form(self.draw(v, j)).max(T::zero()).sqrt()).abs())
            .sum::<T>();
        total / T::from_count(meds.len().max(1))
    }

    fn argmax(&self, gamma: &Matrix<T>) -> (usize, T) {
        let values: Vec<T> = (0..self.directions()).into_par_iter().map(|v| self.direction_value(v, gamma)).collect();
        let mut best = (0, T::neg_infinity());
        for (i, &x) in values.iter().enumerate() {
            if x > best.1 {
                best = (i, x);
            }
        }
        best
    }

    pub fn value(&self, gamma: &Matrix<T>) -> T {
        self.argmax(gamma).1
    }

    /// Objective and a subgradient taken on the first maximising direction.
    pub fn value_and_subgradient(&self, gamma: &Matrix<T>) -> (T, Matrix<T>) {
        let (v, value) = self.argmax(gamma);
        let d = self.d;
        let mut grad = Matrix::zeros(d, d);
        let meds = &self.medians[v];
        let half_c = self.c * T::lit(0.5);
        for (j, &m) in meds.iter().enumerate() {
            let th = self.draw(v, j);
            let q = gamma.quad_form(th);
            if !(q > T::zero()) {
                continue;
            }
            let root = q.sqrt();
            let resid = m - self.c * root;
            if resid == T::zero() {
                continue;
            }
            // d/dΓ |m − c√q| = −sign(m − c√q)·c·θθᵀ/(2√q)
            let w = -resid.signum() * half_c / root;
            for a in 0..d {
                for b in 0..d {
                    grad[(a, b)] = grad[(a, b)] + w * th[a] * th[b];
                }
            }
        }
        let scale = T::from_count(meds.len().max(1));
        (value, grad.scale(scale.recip()))
    }
}

/// One-shot evaluation; prefer [`FrozenObjective`] when evaluating repeatedly.
pub fn cov_objective<T: Real>(gamma: &Matrix<T>, sample: &Sample<T>, draws: &[Vec<Vec<T>>]) -> T {
    FrozenObjective::new(sample, draws).value(gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cov_estimator::posterior::{sample_posterior, TruncatedPosteriorParams};
    use crate::distributions::{sample_gaussian, GaussianModel};
    use crate::linalg::SpdMatrix;
    use crate::mean_estimator::build_sphere_net;
    use crate::rng::RngStream;

    fn setup(sigma: &[f64], n: usize, seed: u64) -> (Sample<f64>, Vec<Vec<Vec<f64>>>) {
        let model = GaussianModel::from_spd(vec![0.0; sigma.len()], SpdMatrix::diag(sigma).unwrap()).unwrap();
        let s = sample_gaussian(&model, n, RngStream::new(seed, 0)).unwrap();
        let d = sigma.len();
        let net = build_sphere_net(d, 2.0 * std::f64::consts::PI / 36.0, RngStream::new(seed, 1)).unwrap();
        let p = TruncatedPosteriorParams::new(2, SpdMatrix::diag(sigma).unwrap(), 1.0, net.get(0).to_vec(), 2.0).unwrap();
        let draws = net
            .iter()
            .enumerate()
            .map(|(i, v)| sample_posterior(&p.with_center(v).unwrap(), 100, RngStream::new(seed, 10 + i as u64)).unwrap().draws)
            .collect();
        (s, draws)
    }

    #[test]
    fn small_at_the_truth() {
        let (s, draws) = setup(&[1.0, 1.0], 2000, 1);
        let f = cov_objective(&Matrix::identity(2), &s, &draws);
        assert!(f <= 0.3, "{f}");
    }

    #[test]
    fn zero_gamma_leaves_the_median_term() {
        let (s, draws) = setup(&[1.0, 1.0], 2000, 2);
        let f = cov_objective(&Matrix::zeros(2, 2), &s, &draws);
        assert!(f > 0.5 * mad_normal_constant::<f64>(), "{f}");
    }

    #[test]
    fn scaling_homogeneity() {
        let (s, draws) = setup(&[2.0, 1.0], 500, 3);
        let gamma = Matrix::from_rows(&[vec![1.5, 0.2], vec![0.2, 0.7]]).unwrap();
        let a = -2.5f64;
        let base = cov_objective(&gamma, &s, &draws);
        let scaled = cov_objective(&gamma.scale(a * a), &s.scaled(a), &draws);
        assert!((scaled - a.abs() * base).abs() <= 1e-12 * scaled);
    }

    #[test]
    fn subgradient_matches_finite_differences() {
        let (s, draws) = setup(&[2.0, 1.0], 500, 4);
        let obj = FrozenObjective::new(&s, &draws);
        let gamma = Matrix::from_rows(&[vec![1.2, 0.1], vec![0.1, 0.9]]).unwrap();
        let (f0, g) = obj.value_and_subgradient(&gamma);
        let mut dir = Matrix::zeros(2, 2);
        dir[(0, 0)] = 0.3;
        dir[(0, 1)] = -0.2;
        dir[(1, 0)] = -0.2;
        dir[(1, 1)] = 0.5;
        let h = 1e-7;
        let f1 = obj.value(&gamma.axpy(h, &dir));
        let slope = (f1 - f0) / h;
        // The max may switch direction, so the directional derivative is at
        // least the linearisation on the active piece.
        assert!(slope >= g.inner(&dir) - 1e-4, "{slope} vs {}", g.inner(&dir));
    }
}
