//! Order statistics, empirical Orlicz-norm proxies and the quantile
//! concentration lab.
//!
//! Quantiles are exact order statistics: `Quant_α(x) = x_(k)` with
//! `k = ⌈α n⌉`. For even `n` the median is therefore the lower middle value,
//! never an average of two points.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{chi2_1_quantile, half_normal_quantile, std_normal_quantile};
use crate::error::{Error, Result};
use crate::rng::{std_normal, RngStream};
use crate::scalar::{mean, pairwise_sum, Real};

/// 1-based rank `⌈α n⌉`, clamped to `[1, n]`. Products within 1e-9 of an
/// integer count as that integer, so `0.6·1000` selects rank 600.
pub fn quantile_rank(alpha: f64, n: usize) -> usize {
    let x = alpha * n as f64;
    let r = x.round();
    let k = if (x - r).abs() <= 1e-9 * x.max(1.0) { r } else { x.ceil() };
    (k as usize).clamp(1, n.max(1))
}

fn check_alpha<T: Real>(alpha: T) -> Result<()> {
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(Error::Domain(format!("quantile level {alpha} outside (0, 1)")));
    }
    Ok(())
}

/// `k`-th smallest value (1-based), reordering `xs` in place.
pub fn order_statistic_in_place<T: Real>(xs: &mut [T], k: usize) -> T {
    debug_assert!(k >= 1 && k <= xs.len());
    let (_, v, _) = xs.select_nth_unstable_by(k - 1, |a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    *v
}

/// `Quant_α` computed in place (the slice is reordered).
pub fn quantile_in_place<T: Real>(xs: &mut [T], alpha: T) -> Result<T> {
    if xs.is_empty() {
        return Err(Error::Domain("quantile of empty input".into()));
    }
    check_alpha(alpha)?;
    let k = quantile_rank(alpha.as_f64(), xs.len());
    Ok(order_statistic_in_place(xs, k))
}

pub fn quantile<T: Real>(xs: &[T], alpha: T) -> Result<T> {
    let mut buf = xs.to_vec();
    quantile_in_place(&mut buf, alpha)
}

/// `Med = Quant_{1/2}`, the `⌈n/2⌉`-th order statistic.
pub fn median<T: Real>(xs: &[T]) -> Result<T> {
    quantile(xs, T::lit(0.5))
}

pub fn median_in_place<T: Real>(xs: &mut [T]) -> Result<T> {
    quantile_in_place(xs, T::lit(0.5))
}

/// Median absolute deviation about the median (unscaled).
pub fn mad<T: Real>(xs: &[T]) -> Result<T> {
    let mut buf = xs.to_vec();
    mad_in_place(&mut buf)
}

pub fn mad_in_place<T: Real>(xs: &mut [T]) -> Result<T> {
    let m = median_in_place(xs)?;
    xs.iter_mut().for_each(|x| *x = (*x - m).abs());
    median_in_place(xs)
}

/// Symmetrically trimmed mean: drops `⌊frac·n⌋` values from each end.
pub fn trimmed_mean<T: Real>(xs: &[T], frac: T) -> Result<T> {
    if xs.is_empty() {
        return Err(Error::Domain("trimmed mean of empty input".into()));
    }
    let mut buf = xs.to_vec();
    buf.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = buf.len();
    let k = ((frac.as_f64() * n as f64).floor() as usize).min((n - 1) / 2);
    Ok(mean(&buf[k..n - k]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrliczOrder {
    /// Sub-exponential, `ψ₁`.
    Psi1,
    /// Sub-Gaussian, `ψ₂`.
    Psi2,
}

pub const ORLICZ_MIN_SAMPLES: usize = 1000;

/// Moment-growth proxy for `‖Y‖_{ψ_α}`:
/// `max_{p ∈ {2,4,6,8,10}} (mean |y|^p)^{1/p} / p^{1/α}`.
pub fn empirical_orlicz_norm<T: Real>(samples: &[T], order: OrliczOrder) -> Result<T> {
    if samples.len() < ORLICZ_MIN_SAMPLES {
        return Err(Error::InsufficientData { needed: ORLICZ_MIN_SAMPLES, got: samples.len() });
    }
    // Normalise by the largest magnitude so high moments cannot overflow.
    let scale = samples.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
    if scale == T::zero() {
        return Ok(T::zero());
    }
    let mut best = T::zero();
    let mut buf = vec![T::zero(); samples.len()];
    for p in [2u32, 4, 6, 8, 10] {
        for (b, &x) in buf.iter_mut().zip(samples) {
            *b = (x.abs() / scale).powi(p as i32);
        }
        let pf = T::from_count(p as usize);
        let lp = mean(&buf).powf(pf.recip()) * scale;
        let denom = match order {
            OrliczOrder::Psi2 => pf.sqrt(),
            OrliczOrder::Psi1 => pf,
        };
        best = best.max(lp / denom);
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConcentrationDist {
    Gaussian,
    HalfNormal,
    Chi2_1,
}

impl std::str::FromStr for ConcentrationDist {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "half_normal" => Ok(Self::HalfNormal),
            "chi2_1" => Ok(Self::Chi2_1),
            other => Err(Error::Config(format!("unknown concentration distribution `{other}`"))),
        }
    }
}

impl ConcentrationDist {
    pub fn quantile(self, q: f64) -> Result<f64> {
        match self {
            Self::Gaussian => std_normal_quantile(q),
            Self::HalfNormal => half_normal_quantile(q),
            Self::Chi2_1 => chi2_1_quantile(q),
        }
    }

    fn draw<R: rand::Rng + ?Sized>(self, rng: &mut R) -> f64 {
        let z: f64 = std_normal(rng);
        match self {
            Self::Gaussian => z,
            Self::HalfNormal => z.abs(),
            Self::Chi2_1 => z * z,
        }
    }

    pub fn tail_family(self) -> TailFamily {
        match self {
            Self::Gaussian | Self::HalfNormal => TailFamily::Subgaussian,
            Self::Chi2_1 => TailFamily::Subexponential,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailFamily {
    /// `P(|Δ| ≥ t) ≈ 2 exp(−c N t²)`
    Subgaussian,
    /// `P(|Δ| ≥ t) ≈ 2 exp(−c N min(t, t²))`
    Subexponential,
}

impl TailFamily {
    fn exponent(self, n: usize, t: f64) -> f64 {
        let n = n as f64;
        match self {
            Self::Subgaussian => n * t * t,
            Self::Subexponential => n * t.min(t * t),
        }
    }

    pub fn orlicz_order(self) -> OrliczOrder {
        match self {
            Self::Subgaussian => OrliczOrder::Psi2,
            Self::Subexponential => OrliczOrder::Psi1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TailFitReport {
    pub dist: ConcentrationDist,
    pub eps: f64,
    pub n: usize,
    pub trials: usize,
    /// Order-statistic rank actually used.
    pub rank: usize,
    pub true_quantile: f64,
    /// Mean of `Y_(k) − q_true` over trials.
    pub mean_deviation: f64,
    /// `N · Var(Y_(k))`.
    pub n_var: f64,
    pub t_grid: Vec<f64>,
    pub empirical_survival: Vec<f64>,
    pub fitted_c: f64,
    pub family: TailFamily,
    /// `√N ·` Orlicz proxy of the deviations (ψ₂ or ψ₁ per family).
    pub scaled_orlicz_proxy: f64,
    #[serde(skip)]
    pub deviations: Vec<f64>,
}

pub const MIN_CONCENTRATION_TRIALS: usize = 1000;
const TAIL_GRID_POINTS: usize = 15;

/// Simulates `Y_((1/2+ε)N) − F⁻¹(1/2+ε)` over independent trials and fits the
/// tail constant of the distribution's concentration family.
pub fn quantile_concentration_experiment(
    dist: ConcentrationDist,
    eps: f64,
    n: usize,
    trials: usize,
    rng: RngStream,
) -> Result<TailFitReport> {
    if !(0.0..=0.25).contains(&eps) {
        return Err(Error::Domain(format!("eps {eps} outside [0, 1/4]")));
    }
    if n == 0 {
        return Err(Error::Domain("sample size must be at least 1".into()));
    }
    if trials < MIN_CONCENTRATION_TRIALS {
        return Err(Error::InsufficientData { needed: MIN_CONCENTRATION_TRIALS, got: trials });
    }
    let level = 0.5 + eps;
    let exact = level * n as f64;
    if (exact - exact.round()).abs() > 1e-9 {
        log::warn!("({level})·{n} = {exact} is not an integer; using rank ⌈{exact}⌉");
    }
    let rank = quantile_rank(level, n);
    let true_quantile = dist.quantile(level)?;

    let deviations: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut g = rng.child(t).generator();
            let mut ys: Vec<f64> = (0..n).map(|_| dist.draw(&mut g)).collect();
            order_statistic_in_place(&mut ys, rank) - true_quantile
        })
        .collect();

    let mean_deviation = mean(&deviations);
    let centered: Vec<f64> = deviations.iter().map(|d| (d - mean_deviation).powi(2)).collect();
    let n_var = n as f64 * pairwise_sum(&centered) / (trials - 1) as f64;

    let abs_dev: Vec<f64> = deviations.iter().map(|d| d.abs()).collect();
    let lo = quantile(&abs_dev, 0.60)?;
    let hi = quantile(&abs_dev, 0.995)?;
    let t_grid: Vec<f64> = (0..TAIL_GRID_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / (TAIL_GRID_POINTS - 1) as f64)
        .collect();
    let mut sorted = abs_dev.clone();
    sorted.sort_by(f64::total_cmp);
    let empirical_survival: Vec<f64> = t_grid
        .iter()
        .map(|&t| {
            let below = sorted.partition_point(|&x| x < t);
            (trials - below) as f64 / trials as f64
        })
        .collect();

    let family = dist.tail_family();
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (&t, &s) in t_grid.iter().zip(&empirical_survival) {
        if s > 0.0 {
            let x = family.exponent(n, t);
            let y = -(s / 2.0).ln();
            sxy += x * y;
            sxx += x * x;
        }
    }
    let fitted_c = if sxx > 0.0 { sxy / sxx } else { f64::INFINITY };
    let scaled_orlicz_proxy = (n as f64).sqrt() * empirical_orlicz_norm(&deviations, family.orlicz_order())?;

    Ok(TailFitReport {
        dist,
        eps,
        n,
        trials,
        rank,
        true_quantile,
        mean_deviation,
        n_var,
        t_grid,
        empirical_survival,
        fitted_c,
        family,
        scaled_orlicz_proxy,
        deviations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quantile_examples() {
        assert_eq!(median(&[1.0, 2.0, 3.0]).unwrap(), 2.0);
        assert_eq!(quantile(&[10.0, 20.0, 30.0, 40.0], 0.75).unwrap(), 30.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]).unwrap(), 2.0);
        assert!(matches!(quantile::<f64>(&[], 0.5), Err(Error::Domain(_))));
        assert!(quantile(&[1.0], 1.0).is_err());
    }

    #[test]
    fn rank_rounding() {
        assert_eq!(quantile_rank(0.6, 1000), 600);
        assert_eq!(quantile_rank(0.5, 1001), 501);
        assert_eq!(quantile_rank(0.5, 4), 2);
        assert_eq!(quantile_rank(1e-9, 5), 1);
    }

    #[test]
    fn mad_and_trimmed_mean() {
        assert_eq!(mad(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap(), 1.0);
        let xs = [1.0, 2.0, 3.0, 4.0, 1000.0];
        assert_eq!(trimmed_mean(&xs, 0.2).unwrap(), 3.0);
    }

    #[test]
    fn orlicz_examples() {
        let c = vec![-3.0_f64; 2000];
        let v = empirical_orlicz_norm(&c, OrliczOrder::Psi2).unwrap();
        assert!((v - 3.0 / 2f64.sqrt()).abs() < 1e-12);
        let v1 = empirical_orlicz_norm(&c, OrliczOrder::Psi1).unwrap();
        assert!((v1 - 1.5).abs() < 1e-12);
        assert!(matches!(
            empirical_orlicz_norm(&[1.0; 10], OrliczOrder::Psi2),
            Err(Error::InsufficientData { .. })
        ));

        let mut g = RngStream::new(1, 1).generator();
        let zs: Vec<f64> = (0..100_000).map(|_| std_normal(&mut g)).collect();
        let v = empirical_orlicz_norm(&zs, OrliczOrder::Psi2).unwrap();
        assert!((0.7..=1.1).contains(&v), "{v}");
        let z3: Vec<f64> = zs.iter().map(|z| 3.0 * z).collect();
        let v3 = empirical_orlicz_norm(&z3, OrliczOrder::Psi2).unwrap();
        assert!((v3 - 3.0 * v).abs() < 1e-9);
    }

    #[test]
    fn concentration_input_validation() {
        let r = RngStream::new(0, 0);
        assert!(quantile_concentration_experiment(ConcentrationDist::Gaussian, 0.3, 101, 1000, r).is_err());
        assert!(quantile_concentration_experiment(ConcentrationDist::Gaussian, 0.0, 101, 10, r).is_err());
    }

    #[test]
    fn concentration_report_shape() {
        let rep = quantile_concentration_experiment(ConcentrationDist::HalfNormal, 0.1, 201, 2000, RngStream::new(3, 0))
            .unwrap();
        assert_eq!(rep.t_grid.len(), 15);
        assert!(rep.empirical_survival.windows(2).all(|w| w[0] >= w[1]));
        assert!(rep.fitted_c > 0.0);
        assert_eq!(rep.rank, quantile_rank(0.6, 201));
        let json = serde_json::to_value(&rep).unwrap();
        for key in ["t_grid", "empirical_survival", "fitted_c", "family"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    proptest! {
        #[test]
        fn quantile_permutation_invariant(mut xs in prop::collection::vec(-1e6f64..1e6, 1..60), alpha in 0.01f64..0.99, seed in any::<u64>()) {
            let q = quantile(&xs, alpha).unwrap();
            // deterministic shuffle
            let mut s = seed;
            for i in (1..xs.len()).rev() {
                s = crate::rng::splitmix64(s);
                xs.swap(i, (s % (i as u64 + 1)) as usize);
            }
            prop_assert_eq!(quantile(&xs, alpha).unwrap(), q);
        }

        #[test]
        fn quantile_monotone(xs in prop::collection::vec(-1e3f64..1e3, 1..60), bumps in prop::collection::vec(0f64..10.0, 60), alpha in 0.01f64..0.99) {
            let ys: Vec<f64> = xs.iter().zip(&bumps).map(|(x, b)| x + b).collect();
            prop_assert!(quantile(&xs, alpha).unwrap() <= quantile(&ys, alpha).unwrap());
        }

        #[test]
        fn quantile_affine_equivariant(xs in prop::collection::vec(-1e3f64..1e3, 1..60), a in 0f64..10.0, b in -100f64..100.0, alpha in 0.01f64..0.99) {
            let ys: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
            let lhs = quantile(&ys, alpha).unwrap();
            let rhs = a * quantile(&xs, alpha).unwrap() + b;
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
        }
    }
}
