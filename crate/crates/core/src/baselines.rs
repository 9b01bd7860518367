//! Classical estimators used as comparison points.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{norm, SpdMatrix};
use crate::mean_estimator::{chebyshev_center, default_tolerance, SphereNet};
use crate::orderstats::{median_in_place, trimmed_mean};
use crate::sample::Sample;
use crate::scalar::Real;
use crate::tuning::trimmed_second_moment;

/// Extra trimming on top of `ε` for [`trimmed_mean_net`].
pub const TRIM_MARGIN: f64 = 0.02;
pub const WEISZFELD_TOL: f64 = 1e-8;
pub const WEISZFELD_MAX_ITER: usize = 10_000;

fn nonempty<T: Real>(sample: &Sample<T>) -> Result<()> {
    if sample.is_empty() {
        Err(Error::Domain("empty sample".into()))
    } else {
        Ok(())
    }
}

pub fn sample_mean<T: Real>(sample: &Sample<T>) -> Result<Vec<T>> {
    nonempty(sample)?;
    Ok(sample.mean())
}

pub fn coord_median<T: Real>(sample: &Sample<T>) -> Result<Vec<T>> {
    nonempty(sample)?;
    (0..sample.d()).map(|j| median_in_place(&mut sample.column(j))).collect()
}

/// Weiszfeld iteration started at the coordinatewise median; stops when a
/// step moves less than `1e-8·(1 + ‖y‖)`.
pub fn geometric_median<T: Real>(sample: &Sample<T>) -> Result<Vec<T>> {
    let mut y = coord_median(sample)?;
    let tol = T::lit(WEISZFELD_TOL);
    let tiny = T::epsilon() * T::lit(16.0);
    for _ in 0..WEISZFELD_MAX_ITER {
        let mut num = vec![T::zero(); sample.d()];
        let mut den = T::zero();
        let mut at_point = false;
        for row in sample.rows() {
            let diff: Vec<T> = row.iter().zip(&y).map(|(&a, &b)| a - b).collect();
            let dist = norm(&diff);
            if dist <= tiny * (T::one() + norm(&y)) {
                at_point = true;
                continue;
            }
            let w = dist.recip();
            for (n, &x) in num.iter_mut().zip(row) {
                *n = *n + w * x;
            }
            den = den + w;
        }
        if den == T::zero() {
            return Ok(y);
        }
        let next: Vec<T> = num.iter().map(|&n| n / den).collect();
        let step: Vec<T> = next.iter().zip(&y).map(|(&a, &b)| a - b).collect();
        let moved = norm(&step);
        y = next;
        if moved <= tol * (T::one() + norm(&y)) || (at_point && moved == T::zero()) {
            break;
        }
    }
    Ok(y)
}

/// Trimmed mean of the projections on each net direction, trimming
/// `ε + 0.02` per side, followed by the Chebyshev center of those values.
pub fn trimmed_mean_net<T: Real>(sample: &Sample<T>, eps: T, net: &SphereNet<T>) -> Result<Vec<T>> {
    nonempty(sample)?;
    if net.dim() != sample.d() {
        return Err(Error::Dimension { expected: sample.d(), got: net.dim() });
    }
    let frac = (eps + T::lit(TRIM_MARGIN)).min(T::lit(0.49));
    let values = net
        .directions()
        .par_iter()
        .map(|v| trimmed_mean(&sample.project(v), frac))
        .collect::<Result<Vec<T>>>()?;
    let tol = default_tolerance(&values);
    Ok(chebyshev_center(net, &values, tol)?.center)
}

/// `(1/N) Σ xᵢxᵢᵀ`.
pub fn sample_cov<T: Real>(sample: &Sample<T>) -> Result<SpdMatrix<T>> {
    nonempty(sample)?;
    let m = sample.second_moment(0..sample.n(), T::from_count(sample.n()));
    Ok(SpdMatrix::psd_projection(&m))
}

/// Second moment after dropping the `⌈εN⌉` largest-norm rows.
pub fn trimmed_cov<T: Real>(sample: &Sample<T>, eps: T) -> Result<SpdMatrix<T>> {
    nonempty(sample)?;
    trimmed_second_moment(sample, eps)
}
