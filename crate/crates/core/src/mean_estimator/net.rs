use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{norm, Matrix};
use crate::rng::{std_normal_vec, RngStream};
use crate::scalar::Real;

/// Default cap on the number of net directions.
pub const DEFAULT_MAX_NET_SIZE: usize = 200_000;

const COVERING_CONSTANT: f64 = 3.0;

/// Finite, negation-closed set of unit directions standing in for `S^{d-1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SphereNet<T: Real> {
    d: usize,
    directions: Vec<Vec<T>>,
    pub resolution: T,
}

impl<T: Real> SphereNet<T> {
    /// Wraps explicit directions. They are normalised; negation closure is
    /// checked, not enforced.
    pub fn from_directions(d: usize, directions: Vec<Vec<T>>, resolution: T) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::Domain("sphere net needs at least one direction".into()));
        }
        let mut dirs = Vec::with_capacity(directions.len());
        for v in directions {
            if v.len() != d {
                return Err(Error::Dimension { expected: d, got: v.len() });
            }
            let n = norm(&v);
            if n == T::zero() || !n.is_finite() {
                return Err(Error::Domain("net direction must be nonzero and finite".into()));
            }
            dirs.push(v.into_iter().map(|x| x / n).collect());
        }
        Ok(Self { d, directions: dirs, resolution })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn directions(&self) -> &[Vec<T>] {
        &self.directions
    }

    pub fn get(&self, i: usize) -> &[T] {
        &self.directions[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[T]> + '_ {
        self.directions.iter().map(Vec::as_slice)
    }

    /// `v ↦ Q v` for every direction.
    pub fn rotated(&self, q: &Matrix<T>) -> Self {
        Self { d: self.d, directions: self.directions.iter().map(|v| q.matvec(v)).collect(), resolution: self.resolution }
    }

    pub fn is_negation_closed(&self, tol: T) -> bool {
        self.directions.iter().all(|v| {
            self.directions.iter().any(|w| v.iter().zip(w).all(|(&a, &b)| (a + b).abs() <= tol))
        })
    }

    /// Smallest eigenvalue of `Σ v vᵀ` relative to the largest; zero iff the
    /// directions do not span `R^d`.
    pub fn spanning_margin(&self) -> T {
        let mut g = Matrix::zeros(self.d, self.d);
        for v in &self.directions {
            g = g.add(&Matrix::outer(v));
        }
        let e = g.sym_eigen();
        let top = *e.values.last().unwrap();
        if top <= T::zero() {
            T::zero()
        } else {
            e.values[0].max(T::zero()) / top
        }
    }
}

pub fn build_sphere_net<T: Real>(d: usize, resolution: T, rng: RngStream) -> Result<SphereNet<T>> {
    build_sphere_net_capped(d, resolution, rng, DEFAULT_MAX_NET_SIZE)
}

/// * `d = 1`: `{+1, −1}`.
/// * `d = 2`: `⌈2π/resolution⌉` equiangular directions (rounded up to even).
/// * `d ≥ 3`: `⌈(3/resolution)^{d−1}⌉` directions drawn as i.i.d. uniform
///   antipodal pairs.
pub fn build_sphere_net_capped<T: Real>(d: usize, resolution: T, rng: RngStream, cap: usize) -> Result<SphereNet<T>> {
    if d == 0 {
        return Err(Error::Domain("sphere net dimension must be at least 1".into()));
    }
    if !(resolution > T::zero() && resolution <= T::one()) {
        return Err(Error::Domain(format!("net resolution {resolution} outside (0, 1]")));
    }
    let res = resolution.as_f64();
    match d {
        1 => SphereNet::from_directions(1, vec![vec![T::one()], vec![-T::one()]], resolution),
        2 => {
            let mut m = (2.0 * std::f64::consts::PI / res - 1e-9).ceil() as usize;
            m += m % 2;
            if m > cap {
                return Err(Error::NetTooLarge { size: m, cap });
            }
            let dirs = (0..m)
                .map(|k| {
                    let a = T::from_count(k) * T::TAU() / T::from_count(m);
                    vec![a.cos(), a.sin()]
                })
                .collect();
            SphereNet::from_directions(2, dirs, resolution)
        }
        _ => {
            let target = (COVERING_CONSTANT / res).powi(d as i32 - 1);
            if !target.is_finite() || target > cap as f64 {
                return Err(Error::NetTooLarge { size: target.min(usize::MAX as f64) as usize, cap });
            }
            let pairs = ((target - 1e-9).ceil() as usize).div_ceil(2).max(1);
            if 2 * pairs > cap {
                return Err(Error::NetTooLarge { size: 2 * pairs, cap });
            }
            let mut g = rng.generator();
            let mut dirs = Vec::with_capacity(2 * pairs);
            while dirs.len() < 2 * pairs {
                let v: Vec<T> = std_normal_vec(&mut g, d);
                let n = norm(&v);
                if n > T::lit(1e-12) {
                    let u: Vec<T> = v.into_iter().map(|x| x / n).collect();
                    let neg = u.iter().map(|&x| -x).collect();
                    dirs.push(u);
                    dirs.push(neg);
                }
            }
            SphereNet::from_directions(d, dirs, resolution)
        }
    }
}

/// Net used when the caller does not supply one.
pub fn default_net<T: Real>(d: usize, rng: RngStream) -> Result<SphereNet<T>> {
    let res = match d {
        1 | 2 => std::f64::consts::PI / 180.0,
        _ => 0.5,
    };
    build_sphere_net(d, T::lit(res), rng)
}
