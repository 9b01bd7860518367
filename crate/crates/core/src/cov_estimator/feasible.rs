//! The feasible set
//! `{Γ ⪰ 0 : |tr(ΓH) − α| ≤ s·tr(ΓH), Γ ⪯ 10G, ‖Γ‖ ≤ 10ω}`
//! and a Dykstra projection onto it.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SpdMatrix};
use crate::scalar::Real;

pub const DEFAULT_C_CONST: f64 = 3.0;
pub const PROJECTION_TOL: f64 = 1e-8;
pub const MAX_SWEEPS: usize = 500;
/// Relative violation allowed when testing membership.
pub const MEMBERSHIP_TOL: f64 = 1e-6;

/// `c·(√((r(G) + log(1/δ))/N) + ε)`.
pub fn slack<T: Real>(c_const: T, g: &SpdMatrix<T>, delta: T, n: usize, eps: T) -> T {
    let inner = (g.effective_rank() + delta.recip().ln()) / T::from_count(n);
    c_const * (inner.sqrt() + eps)
}

#[derive(Debug, Clone, Serialize)]
pub struct FeasibleSetH<T: Real> {
    pub h: SpdMatrix<T>,
    pub alpha: T,
    pub slack: T,
    pub omega: T,
    pub g: SpdMatrix<T>,
}

/// Constraint violations, each relative to the scale of its constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residuals<T> {
    pub psd: T,
    pub loewner_cap: T,
    pub op_norm: T,
    pub trace_slab: T,
}

impl<T: Real> Residuals<T> {
    pub fn max(&self) -> T {
        self.psd.max(self.loewner_cap).max(self.op_norm).max(self.trace_slab)
    }

    pub fn within(&self, tol: T) -> bool {
        self.max() <= tol
    }
}

impl<T: Real> std::fmt::Display for Residuals<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "psd {}, loewner cap {}, operator norm {}, trace slab {}",
            self.psd, self.loewner_cap, self.op_norm, self.trace_slab
        )
    }
}

impl<T: Real> FeasibleSetH<T> {
    /// Builds the set and checks that it is nonempty by testing the scaled
    /// family `t·clip(10G, [0, 10ω])`, `t ∈ (0, 1]`.
    pub fn new(h: SpdMatrix<T>, alpha: T, g: SpdMatrix<T>, omega: T, slack: T) -> Result<Self> {
        let d = h.dim();
        if g.dim() != d {
            return Err(Error::Dimension { expected: d, got: g.dim() });
        }
        if !(alpha > T::zero()) || !alpha.is_finite() {
            return Err(Error::Config(format!("trace slab: alpha {alpha} must be positive")));
        }
        if !(omega > T::zero()) || !omega.is_finite() {
            return Err(Error::Config(format!("operator-norm bound: omega {omega} must be positive")));
        }
        if !(slack >= T::zero()) || !slack.is_finite() {
            return Err(Error::Config(format!("trace slab: slack {slack} must be non-negative")));
        }
        let set = Self { h, alpha, slack, omega, g };
        let widest = set.project_box(&set.cap_matrix());
        let reach = widest.inner(set.h.matrix());
        let (lo, _) = set.trace_bounds();
        if reach < lo * (T::one() - T::lit(MEMBERSHIP_TOL)) {
            return Err(Error::Config(format!(
                "trace slab unreachable: tr(ΓH) ≥ {lo} is required but Γ ⪯ 10G with ‖Γ‖ ≤ 10ω allows at most {reach}"
            )));
        }
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    /// `[α/(1+s), α/(1−s)]`; the upper end is infinite once `s ≥ 1`.
    pub fn trace_bounds(&self) -> (T, T) {
        let lo = self.alpha / (T::one() + self.slack);
        let hi = if self.slack < T::one() { self.alpha / (T::one() - self.slack) } else { T::infinity() };
        (lo, hi)
    }

    fn cap_matrix(&self) -> Matrix<T> {
        self.g.matrix().scale(T::lit(10.0))
    }

    fn op_bound(&self) -> T {
        T::lit(10.0) * self.omega
    }

    fn scale(&self) -> T {
        self.op_bound().max(T::lit(10.0) * self.g.op_norm())
    }

    pub fn residuals(&self, gamma: &Matrix<T>) -> Residuals<T> {
        let s = self.scale();
        let ev = gamma.symmetrized().sym_eigen().values;
        let psd = (-ev[0]).max(T::zero()) / s;
        let op_norm = (ev[ev.len() - 1] - self.op_bound()).max(T::zero()) / self.op_bound();
        let cap_ev = self.cap_matrix().sub(gamma).symmetrized().sym_eigen().values;
        let loewner_cap = (-cap_ev[0]).max(T::zero()) / s;
        let tr = gamma.inner(self.h.matrix());
        let trace_slab = ((tr - self.alpha).abs() - self.slack * tr).max(T::zero()) / self.alpha;
        Residuals { psd, loewner_cap, op_norm, trace_slab }
    }

    pub fn contains(&self, gamma: &Matrix<T>) -> bool {
        self.residuals(gamma).within(T::lit(MEMBERSHIP_TOL))
    }

    fn project_box(&self, x: &Matrix<T>) -> Matrix<T> {
        let e = x.sym_eigen();
        let top = self.op_bound();
        if e.values[0] >= T::zero() && e.values[e.values.len() - 1] <= top {
            return x.clone();
        }
        let clipped: Vec<T> = e.values.iter().map(|&v| v.max(T::zero()).min(top)).collect();
        Matrix::from_eigen(&clipped, &e.vectors)
    }

    fn project_cap(&self, x: &Matrix<T>) -> Matrix<T> {
        let excess = x.sub(&self.cap_matrix()).symmetrized();
        let e = excess.sym_eigen();
        if e.values[e.values.len() - 1] <= T::zero() {
            return x.clone();
        }
        let pos: Vec<T> = e.values.iter().map(|&v| v.max(T::zero())).collect();
        x.sub(&Matrix::from_eigen(&pos, &e.vectors)).symmetrized()
    }

    fn project_slab(&self, x: &Matrix<T>) -> Matrix<T> {
        let hm = self.h.matrix();
        let hh = hm.inner(hm);
        if hh == T::zero() {
            return x.clone();
        }
        let tr = x.inner(hm);
        let (lo, hi) = self.trace_bounds();
        if tr < lo {
            x.axpy((lo - tr) / hh, hm)
        } else if tr > hi {
            x.axpy((hi - tr) / hh, hm)
        } else {
            x.clone()
        }
    }

    /// Frobenius-nearest member of the set, computed with Dykstra's
    /// alternating projections over the trace slab, the Loewner cap and the
    /// spectral box `0 ⪯ Γ`, `‖Γ‖ ≤ 10ω`.
    pub fn project(&self, raw: &Matrix<T>) -> Result<SpdMatrix<T>> {
        let d = self.dim();
        if raw.rows() != d || raw.cols() != d {
            return Err(Error::Dimension { expected: d, got: raw.rows() });
        }
        if raw.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("matrix to project has non-finite entries".into()));
        }
        let tol = T::lit(PROJECTION_TOL) * self.scale();
        let member_tol = T::lit(MEMBERSHIP_TOL);
        let mut x = raw.symmetrized();
        if self.residuals(&x).max() == T::zero() {
            return SpdMatrix::new(x);
        }
        let zero = Matrix::zeros(d, d);
        let (mut p, mut q, mut r) = (zero.clone(), zero.clone(), zero);
        let mut sweeps = 0;
        while sweeps < MAX_SWEEPS {
            sweeps += 1;
            let y = self.project_slab(&x.add(&p));
            p = x.add(&p).sub(&y);
            let z = self.project_cap(&y.add(&q));
            q = y.add(&q).sub(&z);
            let next = self.project_box(&z.add(&r));
            r = z.add(&r).sub(&next);
            let change = next.sub(&x).frobenius();
            x = next;
            if change <= tol && self.residuals(&x).within(member_tol) {
                break;
            }
        }
        let res = self.residuals(&x);
        if !res.within(member_tol) {
            return Err(Error::ProjectionFailed { sweeps, residuals: res.to_string() });
        }
        Ok(SpdMatrix::psd_projection(&x))
    }
}

pub fn project_feasible<T: Real>(raw: &Matrix<T>, set: &FeasibleSetH<T>) -> Result<SpdMatrix<T>> {
    set.project(raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_set() -> FeasibleSetH<f64> {
        // H = I/4, α = tr(Σ H) for Σ = diag(2, 1).
        FeasibleSetH::new(
            SpdMatrix::identity(2).scale(0.25),
            0.75,
            SpdMatrix::diag(&[1.0, 0.5]).unwrap(),
            2.0,
            0.2,
        )
        .unwrap()
    }

    #[test]
    fn feasible_input_is_unchanged() {
        let set = unit_set();
        let sigma = Matrix::from_diag(&[2.0, 1.0]);
        assert!(set.contains(&sigma));
        let out = set.project(&sigma).unwrap();
        assert!(out.matrix().sub(&sigma).max_abs() <= 1e-9);
    }

    #[test]
    fn cap_becomes_active() {
        let set = unit_set();
        let raw = set.cap_matrix().scale(100.0);
        let out = set.project(&raw).unwrap();
        let g_norm = set.g.op_norm();
        let margin = set.cap_matrix().sub(out.matrix()).sym_eigen().values[0];
        assert!(margin >= -1e-6 * g_norm, "{margin}");
        assert!(set.contains(out.matrix()));
    }

    #[test]
    fn negative_eigenvalue_is_clipped_near_optimally() {
        let set = unit_set();
        let raw = Matrix::from_rows(&[vec![3.0, 0.0], vec![0.0, -1.0]]).unwrap();
        let out = set.project(&raw).unwrap();
        assert!(out.min_eigenvalue() >= 0.0);
        // Oracle: the eigenvalue clip, which is itself a member here.
        let oracle = SpdMatrix::psd_projection(&raw).into_matrix();
        assert!(set.contains(&oracle));
        let got = out.matrix().sub(&raw).frobenius();
        let best = oracle.sub(&raw).frobenius();
        assert!(got <= best + 1e-4, "{got} vs {best}");
    }

    #[test]
    fn empty_set_is_a_config_error() {
        let r = FeasibleSetH::new(SpdMatrix::identity(2), 1e6, SpdMatrix::identity(2), 1.0, 0.1);
        match r {
            Err(Error::Config(msg)) => assert!(msg.contains("trace slab")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn slack_formula() {
        let g = SpdMatrix::identity(2);
        let s = slack(3.0, &g, 0.05, 2000, 0.1);
        let want = 3.0 * (((2.0 + 20f64.ln()) / 2000.0).sqrt() + 0.1);
        assert!((s - want).abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn projection_output_is_a_member(a in -30.0f64..30.0, b in -10.0f64..10.0, c in -30.0f64..30.0) {
            let set = unit_set();
            let raw = Matrix::from_rows(&[vec![a, b], vec![b, c]]).unwrap();
            let out = set.project(&raw).unwrap();
            prop_assert!(set.contains(out.matrix()));
        }

        #[test]
        fn projection_is_idempotent(a in -30.0f64..30.0, b in -10.0f64..10.0, c in -30.0f64..30.0) {
            let set = unit_set();
            let raw = Matrix::from_rows(&[vec![a, b], vec![b, c]]).unwrap();
            let once = set.project(&raw).unwrap();
            let twice = set.project(once.matrix()).unwrap();
            prop_assert!(twice.matrix().sub(once.matrix()).max_abs() <= 1e-6);
        }
    }
}
