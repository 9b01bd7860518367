//! Univariate normal-family quantiles and seeded multivariate samplers.
//!
//! `Φ` is evaluated from a positive-term erf series near the origin and a
//! Lentz-evaluated continued fraction for erfc in the tails; both reach full
//! double precision (absolute error well under 1e-15 for `f64`). `Φ⁻¹` is a
//! bracketed Newton iteration that falls back to bisection whenever a step
//! leaves the bracket.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SpdMatrix};
use crate::rng::{open_unit, std_normal, std_normal_vec, RngStream};
use crate::sample::Sample;
use crate::scalar::Real;

/// `erf(z)` for `0 ≤ z`, series `2/√π · e^{-z²} Σ (2z²)ⁿ z / (2n+1)!!`.
fn erf_series<T: Real>(z: T) -> T {
    let two_z2 = T::lit(2.0) * z * z;
    let mut term = z;
    let mut sum = z;
    let mut k = T::one();
    for _ in 0..500 {
        k = k + T::lit(2.0);
        term = term * two_z2 / k;
        sum = sum + term;
        if term <= sum * T::epsilon() * T::lit(0.25) {
            break;
        }
    }
    T::FRAC_2_SQRT_PI() * (-z * z).exp() * sum
}

/// `erfc(z)` for `z ≥ 2` via the continued fraction
/// `z + (1/2)/(z + 1/(z + (3/2)/(z + …)))`.
fn erfc_continued_fraction<T: Real>(z: T) -> T {
    let tiny = T::min_positive_value() * T::lit(1e10);
    let mut f = z;
    let mut c = z;
    let mut d = T::zero();
    let half = T::lit(0.5);
    for k in 1..2000 {
        let a = T::from_count(k) * half;
        d = z + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = z + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = d.recip();
        let delta = c * d;
        f = f * delta;
        if (delta - T::one()).abs() <= T::epsilon() {
            break;
        }
    }
    (-z * z).exp() * T::FRAC_2_SQRT_PI() * T::lit(0.5) / f
}

/// Standard normal CDF `Φ(x)`.
pub fn std_normal_cdf<T: Real>(x: T) -> T {
    if x.is_nan() {
        return x;
    }
    let z = x.abs() * T::FRAC_1_SQRT_2();
    let half = T::lit(0.5);
    let upper_tail = if z < T::lit(2.0) { half - half * erf_series(z) } else { half * erfc_continued_fraction(z) };
    if x >= T::zero() {
        T::one() - upper_tail
    } else {
        upper_tail
    }
}

pub fn std_normal_pdf<T: Real>(x: T) -> T {
    (-(x * x) * T::lit(0.5)).exp() / (T::lit(2.0) * T::PI()).sqrt()
}

/// Standard normal quantile `Φ⁻¹(q)` for `q ∈ (0, 1)`.
pub fn std_normal_quantile<T: Real>(q: T) -> Result<T> {
    if !(q > T::zero() && q < T::one()) {
        return Err(Error::Domain(format!("normal quantile level {q} outside (0, 1)")));
    }
    let half = T::lit(0.5);
    if q == half {
        return Ok(T::zero());
    }
    // Solve in the lower half and reflect, so both tails get relative accuracy.
    if q > half {
        return Ok(-lower_quantile(T::one() - q));
    }
    Ok(lower_quantile(q))
}

fn lower_quantile<T: Real>(q: T) -> T {
    let mut lo = T::lit(-40.0);
    let mut hi = T::zero();
    let mut x = T::lit(-1.0);
    for _ in 0..300 {
        let f = std_normal_cdf(x) - q;
        if f == T::zero() {
            return x;
        }
        if f < T::zero() {
            lo = x;
        } else {
            hi = x;
        }
        let pdf = std_normal_pdf(x);
        let mut next = if pdf > T::zero() { x - f / pdf } else { lo };
        if !(next > lo && next < hi) {
            next = (lo + hi) * T::lit(0.5);
        }
        let step = (next - x).abs();
        x = next;
        if step <= T::epsilon() * T::lit(4.0) * (T::one() + x.abs()) || hi - lo <= T::epsilon() * (T::one() + x.abs()) {
            break;
        }
    }
    x
}

/// Quantile of `|Z|`, `Z ~ N(0,1)`: `Φ⁻¹((1+q)/2)`.
pub fn half_normal_quantile<T: Real>(q: T) -> Result<T> {
    if !(q > T::zero() && q < T::one()) {
        return Err(Error::Domain(format!("half-normal quantile level {q} outside (0, 1)")));
    }
    std_normal_quantile((T::one() + q) * T::lit(0.5))
}

/// Quantile of `χ²₁`: the squared half-normal quantile.
pub fn chi2_1_quantile<T: Real>(q: T) -> Result<T> {
    let h = half_normal_quantile(q)?;
    Ok(h * h)
}

pub fn half_normal_cdf<T: Real>(x: T) -> T {
    if x <= T::zero() {
        T::zero()
    } else {
        T::lit(2.0) * std_normal_cdf(x) - T::one()
    }
}

pub fn chi2_1_cdf<T: Real>(x: T) -> T {
    if x <= T::zero() {
        T::zero()
    } else {
        half_normal_cdf(x.sqrt())
    }
}

/// `Φ⁻¹(3/4)`, the MAD of a standard normal.
pub fn mad_normal_constant<T: Real>() -> T {
    std_normal_quantile(T::lit(0.75)).expect("0.75 in (0,1)")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianModel<T: Real> {
    pub mean: Vec<T>,
    pub cov: SpdMatrix<T>,
}

impl<T: Real> GaussianModel<T> {
    pub fn new(mean: Vec<T>, cov: Matrix<T>) -> Result<Self> {
        let cov = SpdMatrix::new(cov)?;
        Self::from_spd(mean, cov)
    }

    pub fn from_spd(mean: Vec<T>, cov: SpdMatrix<T>) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::InvalidModel(format!(
                "mean has length {} but covariance is {}x{}",
                mean.len(),
                cov.dim(),
                cov.dim()
            )));
        }
        Ok(Self { mean, cov })
    }

    pub fn standard(d: usize) -> Self {
        Self { mean: vec![T::zero(); d], cov: SpdMatrix::identity(d) }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Diagonal covariance `diag(1, s, …, s)` with effective rank `r ∈ [1, d]`.
pub fn cov_with_effective_rank<T: Real>(d: usize, r: T) -> Result<SpdMatrix<T>> {
    if d == 0 || r < T::one() || r > T::from_count(d) {
        return Err(Error::InvalidModel(format!("effective rank {r} outside [1, {d}]")));
    }
    let mut diag = vec![T::one(); d];
    if d > 1 {
        let s = (r - T::one()) / T::from_count(d - 1);
        diag[1..].iter_mut().for_each(|x| *x = s);
    }
    SpdMatrix::diag(&diag)
}

/// `n` i.i.d. rows from `N(μ, Σ)`, computed as `μ + Σ^{1/2} z`.
pub fn sample_gaussian<T: Real>(model: &GaussianModel<T>, n: usize, rng: RngStream) -> Result<Sample<T>> {
    if n == 0 {
        return Err(Error::Domain("sample size must be at least 1".into()));
    }
    let d = model.dim();
    let root = model.cov.sqrt();
    let mut g = rng.generator();
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let z: Vec<T> = std_normal_vec(&mut g, d);
        let y = root.matvec(&z);
        data.extend(model.mean.iter().zip(y).map(|(&m, yi)| m + yi));
    }
    Sample::new(n, d, data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SphericalProfile {
    Gaussian,
    /// Uniform on the unit ball.
    UniformBall,
    /// Density proportional to `1/(1 + exp(‖x‖²/2))`: Gaussian-tailed, with a
    /// flattened logistic-shaped core.
    LogisticRadial,
}

impl std::str::FromStr for SphericalProfile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "uniform_ball" => Ok(Self::UniformBall),
            "logistic_radial" => Ok(Self::LogisticRadial),
            other => Err(Error::Config(format!("unknown spherical profile `{other}`"))),
        }
    }
}

/// `n` rows distributed as `scale^{1/2} U` with `U` spherically symmetric.
pub fn sample_spherical<T: Real>(
    profile: SphericalProfile,
    scale: &SpdMatrix<T>,
    n: usize,
    rng: RngStream,
) -> Result<Sample<T>> {
    let d = scale.dim();
    if profile == SphericalProfile::Gaussian {
        let model = GaussianModel::from_spd(vec![T::zero(); d], scale.clone())?;
        return sample_gaussian(&model, n, rng);
    }
    if n == 0 {
        return Err(Error::Domain("sample size must be at least 1".into()));
    }
    let root = scale.sqrt();
    let mut g = rng.generator();
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let u = match profile {
            SphericalProfile::UniformBall => uniform_ball_point(&mut g, d),
            SphericalProfile::LogisticRadial => logistic_radial_point(&mut g, d),
            SphericalProfile::Gaussian => unreachable!(),
        };
        data.extend(root.matvec(&u));
    }
    Sample::new(n, d, data)
}

fn uniform_ball_point<T: Real, R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<T> {
    loop {
        let z: Vec<T> = std_normal_vec(rng, d);
        let r = crate::linalg::norm(&z);
        if r > T::zero() {
            let u: T = open_unit(rng);
            let radius = u.powf(T::one() / T::from_count(d));
            return z.into_iter().map(|x| x / r * radius).collect();
        }
    }
}

fn logistic_radial_point<T: Real, R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<T> {
    // Rejection from N(0, I): target/proposal ∝ 1/(1 + e^{-‖z‖²/2}) ≤ 1.
    loop {
        let z: Vec<T> = (0..d).map(|_| std_normal(rng)).collect();
        let r2 = crate::linalg::dot(&z, &z);
        let accept = T::one() / (T::one() + (-r2 * T::lit(0.5)).exp());
        let u: T = open_unit(rng);
        if u < accept {
            return z;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Φ by bisection on the independent erf Taylor series (alternating form),
    /// used only as a test oracle near the centre.
    fn cdf_taylor_oracle(x: f64) -> f64 {
        let z = x / std::f64::consts::SQRT_2;
        let mut term = z;
        let mut sum = z;
        let mut n = 0.0;
        while term.abs() > 1e-18 {
            n += 1.0;
            term *= -z * z / n;
            sum += term / (2.0 * n + 1.0);
        }
        0.5 + sum / std::f64::consts::PI.sqrt()
    }

    fn bisect_quantile_oracle(q: f64) -> f64 {
        let (mut lo, mut hi) = (-10.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if cdf_taylor_oracle(mid) < q {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn cdf_reference_values() {
        assert_eq!(std_normal_cdf(0.0_f64), 0.5);
        assert!((std_normal_cdf(40.0_f64) - 1.0).abs() < 1e-12);
        assert!((std_normal_cdf(0.6744897501960817_f64) - 0.75).abs() < 1e-10);
        // mpmath reference values (50 digits), frozen.
        let refs = [
            (-8.0_f64, 6.22096057427178e-16),
            (-5.0_f64, 2.866515718791939e-07),
            (-2.5_f64, 0.006209665325776132),
            (-1.0_f64, 0.15865525393145707),
            (1.96_f64, 0.9750021048517795),
            (3.0_f64, 0.9986501019683699),
        ];
        for (x, p) in refs {
            let got = std_normal_cdf(x);
            assert!((got - p).abs() < 1e-15_f64.max(1e-13 * p), "Φ({x}) = {got}, want {p}");
        }
    }

    #[test]
    fn cdf_matches_taylor_oracle_near_centre() {
        for i in -40..=40 {
            let x = i as f64 * 0.1;
            assert!((std_normal_cdf(x) - cdf_taylor_oracle(x)).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn cdf_is_monotone() {
        let mut prev = 0.0;
        for i in -4000..=4000 {
            let p = std_normal_cdf(i as f64 * 0.002);
            assert!(p >= prev);
            prev = p;
        }
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(std_normal_quantile(0.5_f64).unwrap(), 0.0);
        let q = std_normal_quantile(0.75_f64).unwrap();
        assert!((q - bisect_quantile_oracle(0.75)).abs() < 1e-9);
        assert!((q - 0.6744897501960817).abs() < 1e-9);
        for &p in &[1e-9_f64, 0.01, 0.2, 0.37] {
            let a = std_normal_quantile(p).unwrap();
            let b = std_normal_quantile(1.0 - p).unwrap();
            // 1 − p carries a relative error of about ε/p, which bounds the accuracy.
            assert!((a + b).abs() < 1e-10 + 1e-15 / p, "p={p}");
            assert!((std_normal_cdf(a) - p).abs() < 1e-10);
        }
    }

    #[test]
    fn quantile_domain_errors() {
        for q in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(std_normal_quantile(q), Err(Error::Domain(_))));
            assert!(half_normal_quantile(q).is_err());
            assert!(chi2_1_quantile(q).is_err());
        }
    }

    #[test]
    fn inverse_roundtrip_on_grid() {
        for i in -600..=600 {
            let x = i as f64 * 0.01;
            let back = std_normal_quantile(std_normal_cdf(x)).unwrap();
            assert!((back - x).abs() < 1e-8, "x={x} back={back}");
        }
    }

    #[test]
    fn half_normal_and_chi2_identities() {
        let q34 = std_normal_quantile(0.75_f64).unwrap();
        assert!((half_normal_quantile(0.5_f64).unwrap() - q34).abs() < 1e-12);
        assert!((chi2_1_quantile(0.5_f64).unwrap() - q34 * q34).abs() < 1e-12);
        assert!(chi2_1_quantile(1e-6_f64).unwrap() < 1e-11);
        for &q in &[0.1_f64, 0.5, 0.9] {
            assert!((half_normal_cdf(half_normal_quantile(q).unwrap()) - q).abs() < 1e-10);
            assert!((chi2_1_cdf(chi2_1_quantile(q).unwrap()) - q).abs() < 1e-10);
        }
    }

    #[test]
    fn quantile_local_lipschitz_bounds() {
        let h = 1e-6;
        for i in 0..=250 {
            let x = i as f64 * 1e-3;
            let s = (std_normal_quantile(0.5 + x + h).unwrap() - std_normal_quantile(0.5 + x).unwrap()) / h;
            assert!(s <= 4.0, "normal slope {s} at x={x}");
            let t = (half_normal_quantile(0.5 + x + h).unwrap() - half_normal_quantile(0.5 + x).unwrap()) / h;
            assert!(t <= 3.0, "half-normal slope {t} at x={x}");
        }
    }

    #[test]
    fn f32_quantile_is_usable() {
        let q = std_normal_quantile(0.75_f32).unwrap();
        assert!((q - 0.674_489_8).abs() < 1e-5);
    }

    #[test]
    fn zero_covariance_reproduces_mean() {
        let model = GaussianModel::new(vec![1.5, -2.0], Matrix::zeros(2, 2)).unwrap();
        let s = sample_gaussian(&model, 50, RngStream::new(1, 2)).unwrap();
        assert!(s.rows().all(|r| r == [1.5, -2.0]));
    }

    #[test]
    fn sampler_moments() {
        let model = GaussianModel::<f64>::standard(1);
        let s = sample_gaussian(&model, 100_000, RngStream::new(11, 0)).unwrap();
        let xs = s.column(0);
        let m = crate::scalar::mean(&xs);
        let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((0.97..=1.03).contains(&var), "var={var}");

        let model = GaussianModel::new(vec![0.0, 0.0], Matrix::from_diag(&[4.0, 1.0])).unwrap();
        let s = sample_gaussian(&model, 100_000, RngStream::new(12, 0)).unwrap();
        let c = s.second_moment(0..s.n(), s.n() as f64);
        assert!((3.9..=4.1).contains(&c[(0, 0)]), "c00={}", c[(0, 0)]);
    }

    #[test]
    fn sampler_is_deterministic_and_rejects_bad_models() {
        let model = GaussianModel::new(vec![0.0; 3], Matrix::from_diag(&[1.0, 2.0, 3.0])).unwrap();
        let a = sample_gaussian(&model, 100, RngStream::new(5, 9)).unwrap();
        let b = sample_gaussian(&model, 100, RngStream::new(5, 9)).unwrap();
        assert_eq!(a, b);
        let bad = Matrix::from_rows(&[vec![1.0, 0.2], vec![0.1, 1.0]]).unwrap();
        assert!(matches!(GaussianModel::new(vec![0.0, 0.0], bad), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn spherical_profiles() {
        let id = SpdMatrix::<f64>::identity(2);
        let s = sample_spherical(SphericalProfile::UniformBall, &id, 100_000, RngStream::new(3, 0)).unwrap();
        assert!(crate::linalg::norm(&s.mean()) <= 0.02);
        assert!(s.rows().all(|r| crate::linalg::norm(r) <= 1.0));

        let id1 = SpdMatrix::<f64>::identity(1);
        let s = sample_spherical(SphericalProfile::LogisticRadial, &id1, 100_000, RngStream::new(4, 0)).unwrap();
        let med = crate::orderstats::median(&s.column(0)).unwrap();
        assert!(med.abs() <= 0.05, "median {med}");

        let g = sample_spherical(SphericalProfile::Gaussian, &id, 500, RngStream::new(8, 1)).unwrap();
        let h = sample_gaussian(&GaussianModel::standard(2), 500, RngStream::new(8, 1)).unwrap();
        assert_eq!(g, h);
    }

    #[test]
    fn gaussian_profile_passes_ks_on_projection() {
        let id = SpdMatrix::<f64>::identity(3);
        let s = sample_spherical(SphericalProfile::Gaussian, &id, 20_000, RngStream::new(21, 0)).unwrap();
        let v = [0.6, 0.0, 0.8];
        let mut p = s.project(&v);
        p.sort_by(f64::total_cmp);
        let n = p.len() as f64;
        let ks = p
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = std_normal_cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        // 1% critical value of the one-sample KS statistic.
        assert!(ks < 1.628 / n.sqrt(), "ks={ks}");
    }

    #[test]
    fn effective_rank_construction() {
        let s = cov_with_effective_rank(4, 2.5_f64).unwrap();
        assert!((s.effective_rank() - 2.5).abs() < 1e-12);
        assert!(cov_with_effective_rank(3, 0.5_f64).is_err());
    }
}
