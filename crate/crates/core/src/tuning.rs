//! Same-sample tuning of the covariance estimator's inputs: the matrix `G`,
//! trace and operator-norm proxies `τ̂, ω̂`, the integer `β` and `α(H)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::mad_normal_constant;
use crate::error::{Error, Result};
use crate::linalg::{psd_tolerance, Matrix, SpdMatrix};
use crate::mean_estimator::{SphereNet, MIN_TUNING_SAMPLES};
use crate::orderstats::{mad_in_place, median_in_place, trimmed_mean};
use crate::sample::Sample;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct TunedParams<T: Real> {
    pub g: SpdMatrix<T>,
    pub tau: T,
    pub omega: T,
    pub beta: u32,
    /// `α(H)` for the `H` supplied to [`TunedParams::with_alpha`].
    pub alpha: Option<T>,
}

impl<T: Real> TunedParams<T> {
    pub fn with_alpha(mut self, sample: &Sample<T>, h: &Matrix<T>) -> Result<Self> {
        self.alpha = Some(estimate_alpha(sample, h)?);
        Ok(self)
    }
}

/// `⌈εN⌉` with products within 1e-9 of an integer taken as that integer.
pub fn trim_count<T: Real>(eps: T, n: usize) -> usize {
    let x = eps.as_f64() * n as f64;
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

/// Row indices sorted by decreasing norm, ties broken by index.
pub fn rows_by_norm_desc<T: Real>(sample: &Sample<T>) -> Vec<usize> {
    let norms = sample.norms_sq();
    let mut idx: Vec<usize> = (0..sample.n()).collect();
    idx.sort_by(|&a, &b| {
        norms[b].partial_cmp(&norms[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    idx
}

/// Indices left after removing the `k` largest-norm rows, in row order.
fn kept_rows<T: Real>(sample: &Sample<T>, k: usize) -> Vec<usize> {
    let mut keep = rows_by_norm_desc(sample).split_off(k);
    keep.sort_unstable();
    keep
}

fn spd_or_projection<T: Real>(m: Matrix<T>) -> SpdMatrix<T> {
    match SpdMatrix::new(m.clone()) {
        Ok(s) => s,
        Err(_) => SpdMatrix::psd_projection(&m),
    }
}

/// `G = (1/N) Σ_{i ∉ I} xᵢxᵢᵀ` where `I` holds the `⌈εN⌉` largest-norm rows.
pub fn construct_g<T: Real>(sample: &Sample<T>, eps: T) -> Result<SpdMatrix<T>> {
    let n = sample.n();
    if n == 0 {
        return Err(Error::Domain("empty sample".into()));
    }
    if eps < T::zero() {
        return Err(Error::Budget(format!("eps {eps} is negative")));
    }
    let k = trim_count(eps, n);
    if k >= n {
        return Err(Error::Budget(format!("removing {k} of {n} rows leaves nothing")));
    }
    let m = sample.second_moment(kept_rows(sample, k).into_iter(), T::from_count(n));
    Ok(spd_or_projection(m))
}

/// Second-moment matrix of the rows left after dropping the `⌈εN⌉` largest
/// norms, normalised by the number of rows kept.
pub fn trimmed_second_moment<T: Real>(sample: &Sample<T>, eps: T) -> Result<SpdMatrix<T>> {
    let n = sample.n();
    let k = trim_count(eps, n);
    if k >= n {
        return Err(Error::Budget(format!("removing {k} of {n} rows leaves nothing")));
    }
    let m = sample.second_moment(kept_rows(sample, k).into_iter(), T::from_count(n - k));
    Ok(spd_or_projection(m))
}

/// Trimmed mean of `‖xᵢ‖²` with trim fraction `max(2ε, 0.02)` per side.
pub fn robust_trace<T: Real>(sample: &Sample<T>, eps: T) -> Result<T> {
    if sample.n() < MIN_TUNING_SAMPLES {
        return Err(Error::InsufficientData { needed: MIN_TUNING_SAMPLES, got: sample.n() });
    }
    let frac = (T::lit(2.0) * eps).max(T::lit(0.02));
    trimmed_mean(&sample.norms_sq(), frac)
}

/// `max_v (MAD⟨xᵢ, v⟩ / Φ⁻¹(3/4))²` over the net.
pub fn mad_opnorm<T: Real>(sample: &Sample<T>, net: &SphereNet<T>) -> T {
    let c = mad_normal_constant::<T>();
    net.directions()
        .par_iter()
        .map(|v| {
            let mut proj = sample.project(v);
            let s = mad_in_place(&mut proj).expect("nonempty sample") / c;
            s * s
        })
        .collect::<Vec<T>>()
        .into_iter()
        .fold(T::zero(), T::max)
}

pub fn robust_opnorm<T: Real>(sample: &Sample<T>, net: &SphereNet<T>) -> Result<T> {
    if sample.is_empty() {
        return Err(Error::Domain("empty sample".into()));
    }
    if net.is_empty() {
        return Err(Error::Domain("empty net".into()));
    }
    if net.dim() != sample.d() {
        return Err(Error::Dimension { expected: sample.d(), got: net.dim() });
    }
    Ok(mad_opnorm(sample, net))
}

/// `(Φ⁻¹(3/4))⁻² Σ_i Med_j(⟨e_i, H^{1/2} X_j⟩²)`.
pub fn estimate_alpha<T: Real>(sample: &Sample<T>, h: &Matrix<T>) -> Result<T> {
    if sample.n() < MIN_TUNING_SAMPLES {
        return Err(Error::InsufficientData { needed: MIN_TUNING_SAMPLES, got: sample.n() });
    }
    if !h.is_square() || h.rows() != sample.d() {
        return Err(Error::Dimension { expected: sample.d(), got: h.rows() });
    }
    let e = h.symmetrized().sym_eigen();
    let top = e.values.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
    if e.values[0] < -psd_tolerance::<T>() * top {
        return Err(Error::Domain(format!("H is not positive semi-definite (min eigenvalue {})", e.values[0])));
    }
    let floor = T::lit(1e-12) * top;
    let roots: Vec<T> = e.values.iter().map(|&x| if x < floor { T::zero() } else { x.sqrt() }).collect();
    let root = Matrix::from_eigen(&roots, &e.vectors);
    let c = mad_normal_constant::<T>();
    let transformed = sample.transformed(&root);
    let mut total = T::zero();
    for i in 0..sample.d() {
        let mut sq: Vec<T> = transformed.rows().map(|r| r[i] * r[i]).collect();
        total = total + median_in_place(&mut sq)?;
    }
    Ok(total / (c * c))
}

/// Runs `construct_g → robust_trace → robust_opnorm → β` on one sample.
pub fn tune<T: Real>(sample: &Sample<T>, eps: T, net: &SphereNet<T>) -> Result<TunedParams<T>> {
    let g = construct_g(sample, eps)?;
    let tau = robust_trace(sample, eps)?;
    let omega = robust_opnorm(sample, net)?;
    if tau <= T::zero() || omega <= T::zero() {
        return Err(Error::RankDegenerate(format!("tau {tau}, omega {omega}")));
    }
    let beta = (tau / omega).round().max(T::one()).to_u32().unwrap_or(u32::MAX);
    Ok(TunedParams { g, tau, omega, beta, alpha: None })
}
