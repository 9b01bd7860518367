//! Min-max (Chebyshev) center: `argmin_ν max_k |m_k − ⟨ν, v_k⟩|`.
//!
//! The primal LP `min t s.t. −t ≤ m_k − ⟨ν, v_k⟩ ≤ t` has `d + 1` free
//! variables. Its dual
//!
//! ```text
//! max Σ m_k (a_k − b_k)  s.t.  Σ (a_k − b_k) v_k = 0,  Σ (a_k + b_k) = 1,  a, b ≥ 0
//! ```
//!
//! is in standard form with only `d + 1` rows, so a dense two-phase tableau
//! simplex solves it cheaply; `(ν, t)` are read off as the optimal simplex
//! multipliers. The result is cross-checked against subgradient restarts.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::rng::{std_normal_vec, RngStream};
use crate::scalar::Real;

use super::net::SphereNet;

const RESTARTS: usize = 10;
const RESTART_ITERS: usize = 400;

#[derive(Debug, Clone, Serialize)]
pub struct ChebyshevSolution<T: Real> {
    pub center: Vec<T>,
    /// `max_k |m_k − ⟨ν̂, v_k⟩|`
    pub objective: T,
    /// Dual objective of the final basis; equals `objective` up to round-off.
    pub dual_objective: T,
    /// Best objective among the subgradient restarts (≥ `objective` unless the
    /// simplex result was replaced).
    pub restart_best: T,
    pub pivots: usize,
}

/// Default solver tolerance `1e−6·(1 + max|m_k|)`.
pub fn default_tolerance<T: Real>(values: &[T]) -> T {
    let scale = values.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
    T::lit(1e-6) * (T::one() + scale)
}

pub fn minmax_objective<T: Real>(net: &SphereNet<T>, values: &[T], nu: &[T]) -> T {
    net.iter().zip(values).fold(T::zero(), |m, (v, &mv)| m.max((mv - dot(nu, v)).abs()))
}

pub fn chebyshev_center<T: Real>(net: &SphereNet<T>, values: &[T], tol: T) -> Result<ChebyshevSolution<T>> {
    if values.len() != net.len() {
        return Err(Error::Dimension { expected: net.len(), got: values.len() });
    }
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("non-finite directional value".into()));
    }
    if net.spanning_margin() <= T::lit(1e-12) {
        return Err(Error::Unbounded("net directions do not span R^d".into()));
    }
    let d = net.dim();
    let (multipliers, dual_objective, pivots) = solve_dual(net, values)?;
    let mut center = multipliers[..d].to_vec();
    let mut objective = minmax_objective(net, values, &center);

    let restart_best = restart_certificate(net, values);
    if restart_best.1 < objective - tol {
        log::warn!(
            "subgradient restart beat the simplex solution ({} < {}); using the restart",
            restart_best.1,
            objective
        );
        center = restart_best.0;
        objective = restart_best.1;
    }
    Ok(ChebyshevSolution { center, objective, dual_objective, restart_best: restart_best.1, pivots })
}

/// Tableau simplex on the dual LP. Returns the simplex multipliers
/// `(ν, t)`, the dual objective and the pivot count.
fn solve_dual<T: Real>(net: &SphereNet<T>, values: &[T]) -> Result<(Vec<T>, T, usize)> {
    let d = net.dim();
    let k = net.len();
    let rows = d + 1;
    let n_real = 2 * k;
    let cols = n_real + rows + 1;
    let rhs = cols - 1;
    let mut tab = vec![T::zero(); rows * cols];
    let at = |i: usize, j: usize| i * cols + j;

    for (idx, v) in net.iter().enumerate() {
        for r in 0..d {
            tab[at(r, idx)] = v[r];
            tab[at(r, k + idx)] = -v[r];
        }
        tab[at(d, idx)] = T::one();
        tab[at(d, k + idx)] = T::one();
    }
    for r in 0..rows {
        tab[at(r, n_real + r)] = T::one();
    }
    tab[at(d, rhs)] = T::one();
    let mut basis: Vec<usize> = (n_real..n_real + rows).collect();

    let scale = values.iter().fold(T::one(), |m, &x| m.max(x.abs()));
    let eps = T::epsilon() * T::lit(1e4);

    // Phase 1: maximise −Σ artificials.
    let phase1: Vec<T> = (0..n_real + rows).map(|j| if j < n_real { T::zero() } else { -T::one() }).collect();
    let mut pivots = run_simplex(&mut tab, &mut basis, rows, cols, &phase1, n_real + rows, eps)?;
    let infeasibility: T = basis
        .iter()
        .enumerate()
        .filter(|(_, &b)| b >= n_real)
        .map(|(r, _)| tab[at(r, rhs)])
        .sum();
    if infeasibility > eps {
        return Err(Error::Unbounded(format!("dual LP infeasible (residual {infeasibility})")));
    }
    // Drive zero-level artificials out of the basis where possible.
    for r in 0..rows {
        if basis[r] >= n_real {
            if let Some(j) = (0..n_real).find(|&j| tab[at(r, j)].abs() > eps) {
                pivot(&mut tab, rows, cols, r, j);
                basis[r] = j;
                pivots += 1;
            }
        }
    }

    // Phase 2 over the real columns only.
    let cost: Vec<T> = (0..n_real + rows)
        .map(|j| {
            if j < k {
                values[j] / scale
            } else if j < n_real {
                -values[j - k] / scale
            } else {
                T::zero()
            }
        })
        .collect();
    pivots += run_simplex(&mut tab, &mut basis, rows, cols, &cost, n_real, eps)?;

    // y_i = Σ_r c_{B_r} (B⁻¹)_{r,i}; B⁻¹ sits in the artificial block.
    let mut y = vec![T::zero(); rows];
    for (i, yi) in y.iter_mut().enumerate() {
        *yi = (0..rows).map(|r| cost[basis[r]] * tab[at(r, n_real + i)]).sum::<T>() * scale;
    }
    let dual_obj = (0..rows).map(|r| cost[basis[r]] * tab[at(r, rhs)]).sum::<T>() * scale;
    Ok((y, dual_obj, pivots))
}

/// Maximises `cost · x` from the current basis; columns `≥ allowed` never
/// enter. Dantzig pricing, switching to Bland's rule after a run of
/// degenerate pivots.
fn run_simplex<T: Real>(
    tab: &mut [T],
    basis: &mut [usize],
    rows: usize,
    cols: usize,
    cost: &[T],
    allowed: usize,
    eps: T,
) -> Result<usize> {
    let rhs = cols - 1;
    let mut pivots = 0;
    let mut degenerate_run = 0;
    let max_pivots = 50 * (cols + rows) + 1000;
    loop {
        let bland = degenerate_run > 50;
        let mut entering = None;
        let mut best = eps;
        for j in 0..allowed {
            if basis.contains(&j) {
                continue;
            }
            let reduced = cost[j] - (0..rows).map(|r| cost[basis[r]] * tab[r * cols + j]).sum::<T>();
            if reduced > best {
                entering = Some(j);
                if bland {
                    break;
                }
                best = reduced;
            }
        }
        let Some(j) = entering else { return Ok(pivots) };

        let mut leave: Option<(usize, T)> = None;
        for r in 0..rows {
            let a = tab[r * cols + j];
            if a > eps {
                let ratio = tab[r * cols + rhs] / a;
                match leave {
                    None => leave = Some((r, ratio)),
                    Some((lr, lratio)) => {
                        if ratio < lratio - eps || (ratio <= lratio + eps && basis[r] < basis[lr]) {
                            leave = Some((r, ratio));
                        }
                    }
                }
            }
        }
        let Some((r, ratio)) = leave else {
            return Err(Error::Unbounded("dual LP unbounded".into()));
        };
        degenerate_run = if ratio <= eps { degenerate_run + 1 } else { 0 };
        pivot(tab, rows, cols, r, j);
        basis[r] = j;
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::Unbounded(format!("simplex did not terminate within {max_pivots} pivots")));
        }
    }
}

fn pivot<T: Real>(tab: &mut [T], rows: usize, cols: usize, r: usize, j: usize) {
    let p = tab[r * cols + j];
    for c in 0..cols {
        tab[r * cols + c] = tab[r * cols + c] / p;
    }
    for i in 0..rows {
        if i == r {
            continue;
        }
        let f = tab[i * cols + j];
        if f == T::zero() {
            continue;
        }
        for c in 0..cols {
            tab[i * cols + c] = tab[i * cols + c] - f * tab[r * cols + c];
        }
    }
}

/// Best point found by diminishing-step subgradient descent from random
/// starts.
fn restart_certificate<T: Real>(net: &SphereNet<T>, values: &[T]) -> (Vec<T>, T) {
    let d = net.dim();
    let scale = values.iter().fold(T::one(), |m, &x| m.max(x.abs()));
    let mut g = RngStream::new(0x00C0_FFEE, d as u64).generator();
    let mut best = (vec![T::zero(); d], T::infinity());
    for _ in 0..RESTARTS {
        let mut x: Vec<T> = std_normal_vec::<T, _>(&mut g, d).into_iter().map(|z| z * scale).collect();
        let mut fx = minmax_objective(net, values, &x);
        let mut local_best = (x.clone(), fx);
        for it in 1..=RESTART_ITERS {
            let (k, resid) = net
                .iter()
                .zip(values)
                .enumerate()
                .map(|(i, (v, &m))| (i, m - dot(&x, v)))
                .fold((0, T::zero()), |acc, (i, r)| if r.abs() > acc.1.abs() { (i, r) } else { acc });
            let step = scale / T::from_count(it).sqrt();
            let v = net.get(k);
            // ∂|m − ⟨x,v⟩| = −sign(resid)·v
            for (xi, &vi) in x.iter_mut().zip(v) {
                *xi = *xi + step * resid.signum() * vi;
            }
            fx = minmax_objective(net, values, &x);
            if fx < local_best.1 {
                local_best = (x.clone(), fx);
            }
        }
        if local_best.1 < best.1 {
            best = local_best;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mean_estimator::net::build_sphere_net;

    #[test]
    fn one_dimensional_closed_form() {
        let net: SphereNet<f64> = build_sphere_net(1, 1.0, RngStream::new(0, 0)).unwrap();
        for (a, b) in [(3.0, 1.0), (-2.0, 5.0), (0.25, 0.25)] {
            let sol = chebyshev_center(&net, &[a, b], 1e-9).unwrap();
            assert_eq!(sol.center[0], (a - b) / 2.0);
        }
    }

    #[test]
    fn consistent_values_recover_point() {
        let net: SphereNet<f64> = build_sphere_net(2, 0.1, RngStream::new(0, 0)).unwrap();
        let mu = [1.5, -0.7];
        let vals: Vec<f64> = net.iter().map(|v| dot(&mu, v)).collect();
        let tol = default_tolerance(&vals);
        let sol = chebyshev_center(&net, &vals, tol).unwrap();
        assert!(sol.objective <= tol);
        assert!((sol.center[0] - mu[0]).abs() < tol && (sol.center[1] - mu[1]).abs() < tol);
    }

    #[test]
    fn primal_dual_agree_in_3d() {
        let net: SphereNet<f64> = build_sphere_net(3, 0.6, RngStream::new(2, 0)).unwrap();
        let mut g = RngStream::new(5, 0).generator();
        let vals: Vec<f64> = std_normal_vec(&mut g, net.len());
        let sol = chebyshev_center(&net, &vals, 1e-6).unwrap();
        assert!((sol.objective - sol.dual_objective).abs() < 1e-9, "{} vs {}", sol.objective, sol.dual_objective);
        assert!(sol.objective <= sol.restart_best + 1e-9);
    }

    #[test]
    fn non_spanning_net_is_rejected() {
        let net = SphereNet::from_directions(2, vec![vec![0.0, 1.0], vec![0.0, -1.0]], 1.0).unwrap();
        assert!(matches!(chebyshev_center(&net, &[1.0, 2.0], 1e-6), Err(Error::Unbounded(_))));
    }

    #[test]
    fn works_in_f32() {
        let net: SphereNet<f32> = build_sphere_net(2, 0.5, RngStream::new(0, 0)).unwrap();
        let vals: Vec<f32> = net.iter().map(|v| 2.0 * v[0] - v[1]).collect();
        let sol = chebyshev_center(&net, &vals, 1e-3).unwrap();
        assert!((sol.center[0] - 2.0).abs() < 1e-3 && (sol.center[1] + 1.0).abs() < 1e-3);
    }
}
