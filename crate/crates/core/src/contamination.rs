//! Adversaries for the strong contamination model. Each one replaces exactly
//! `⌊εN⌋` rows of a clean sample and records which rows it touched.

use rand::seq::index;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::orderstats::{quantile_rank, order_statistic_in_place};
use crate::rng::{std_normal, RngStream};
use crate::sample::Sample;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdversaryKind<T: Real> {
    /// Uniformly chosen rows replaced by draws from `N(center, scale² I)`.
    Huber { center: Vec<T>, scale: T },
    /// Uniformly chosen rows replaced by `base + magnitude·direction`.
    Shift { base: Vec<T>, direction: Vec<T>, magnitude: T },
    /// Uniformly chosen rows replaced by one common point.
    Cluster { center: Vec<T> },
    /// Sample-aware: the rows with the smallest projections on `direction` are
    /// moved to `(q + offset)·direction`, where `q` is the clean
    /// `(1/2+ε)`-quantile of the projections.
    MedianTilt { direction: Vec<T>, offset: T },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdversarySpec<T: Real> {
    pub kind: AdversaryKind<T>,
    pub epsilon: T,
}

impl<T: Real> AdversarySpec<T> {
    pub fn new(kind: AdversaryKind<T>, epsilon: T) -> Self {
        Self { kind, epsilon }
    }

    pub fn none() -> Self {
        Self { kind: AdversaryKind::Cluster { center: Vec::new() }, epsilon: T::zero() }
    }
}

/// `⌊εN⌋`, rejecting `ε ∉ [0, 1/2)`.
pub fn replacement_budget<T: Real>(epsilon: T, n: usize) -> Result<usize> {
    if !(epsilon >= T::zero() && epsilon < T::lit(0.5)) {
        return Err(Error::Budget(format!("epsilon {epsilon} outside [0, 1/2)")));
    }
    Ok((epsilon.as_f64() * n as f64 + 1e-9).floor() as usize)
}

fn unit<T: Real>(v: &[T], d: usize) -> Result<Vec<T>> {
    if v.len() != d {
        return Err(Error::Dimension { expected: d, got: v.len() });
    }
    let n = norm(v);
    if n == T::zero() || !n.is_finite() {
        return Err(Error::Domain("adversary direction must be a nonzero finite vector".into()));
    }
    Ok(v.iter().map(|&x| x / n).collect())
}

fn check_point<T: Real>(p: &[T], d: usize) -> Result<()> {
    if p.len() != d {
        return Err(Error::Dimension { expected: d, got: p.len() });
    }
    Ok(())
}

pub fn contaminate<T: Real>(clean: &Sample<T>, spec: &AdversarySpec<T>, rng: RngStream) -> Result<Sample<T>> {
    let n = clean.n();
    let d = clean.d();
    if n == 0 {
        return Err(Error::Domain("cannot contaminate an empty sample".into()));
    }
    let budget = replacement_budget(spec.epsilon, n)?;
    let mut out = clean.clone();
    if budget == 0 {
        out.contaminated_idx = Some(Vec::new());
        return Ok(out);
    }
    let mut g = rng.generator();
    let random_rows = |g: &mut rand_chacha::ChaCha8Rng| {
        let mut idx = index::sample(g, n, budget).into_vec();
        idx.sort_unstable();
        idx
    };

    let idx = match &spec.kind {
        AdversaryKind::Huber { center, scale } => {
            check_point(center, d)?;
            let idx = random_rows(&mut g);
            for &i in &idx {
                let row = out.row_mut(i);
                for (x, &c) in row.iter_mut().zip(center) {
                    *x = c + *scale * std_normal::<T, _>(&mut g);
                }
            }
            idx
        }
        AdversaryKind::Shift { base, direction, magnitude } => {
            check_point(base, d)?;
            let u = unit(direction, d)?;
            let target: Vec<T> = base.iter().zip(&u).map(|(&b, &ui)| b + *magnitude * ui).collect();
            let idx = random_rows(&mut g);
            for &i in &idx {
                out.row_mut(i).copy_from_slice(&target);
            }
            idx
        }
        AdversaryKind::Cluster { center } => {
            check_point(center, d)?;
            let idx = random_rows(&mut g);
            for &i in &idx {
                out.row_mut(i).copy_from_slice(center);
            }
            idx
        }
        AdversaryKind::MedianTilt { direction, offset } => {
            let u = unit(direction, d)?;
            let proj = clean.project(&u);
            let mut buf = proj.clone();
            let level = T::lit(0.5) + spec.epsilon;
            let q = order_statistic_in_place(&mut buf, quantile_rank(level.as_f64(), n));
            let target: Vec<T> = u.iter().map(|&ui| (q + *offset) * ui).collect();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| proj[a].partial_cmp(&proj[b]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
            let mut idx: Vec<usize> = order[..budget].to_vec();
            idx.sort_unstable();
            for &i in &idx {
                out.row_mut(i).copy_from_slice(&target);
            }
            idx
        }
    };
    out.contaminated_idx = Some(idx);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{sample_gaussian, GaussianModel};
    use crate::linalg::dot;
    use crate::orderstats::{median, quantile};
    use proptest::prelude::*;

    fn clean(n: usize, d: usize, seed: u64) -> Sample<f64> {
        sample_gaussian(&GaussianModel::standard(d), n, RngStream::new(seed, 0)).unwrap()
    }

    fn all_kinds(d: usize) -> Vec<AdversaryKind<f64>> {
        let mut dir = vec![0.0; d];
        dir[0] = 1.0;
        vec![
            AdversaryKind::Huber { center: vec![5.0; d], scale: 2.0 },
            AdversaryKind::Shift { base: vec![0.0; d], direction: dir.clone(), magnitude: 10.0 },
            AdversaryKind::Cluster { center: vec![7.0; d] },
            AdversaryKind::MedianTilt { direction: dir, offset: 0.01 },
        ]
    }

    #[test]
    fn zero_budget_is_identity() {
        let s = clean(50, 2, 1);
        for kind in all_kinds(2) {
            let out = contaminate(&s, &AdversarySpec::new(kind, 0.0), RngStream::new(2, 0)).unwrap();
            assert_eq!(out.row_hamming(&s), 0);
        }
    }

    #[test]
    fn cluster_budget_arithmetic() {
        let s = clean(100, 2, 3);
        let spec = AdversarySpec::new(AdversaryKind::Cluster { center: vec![3.0, -1.0] }, 0.1);
        let out = contaminate(&s, &spec, RngStream::new(4, 0)).unwrap();
        assert_eq!(out.rows().filter(|r| *r == [3.0, -1.0]).count(), 10);
        assert_eq!(out.contaminated_idx.as_ref().unwrap().len(), 10);
    }

    #[test]
    fn shift_breaks_sample_mean() {
        let s = clean(1000, 2, 5);
        let spec = AdversarySpec::new(
            AdversaryKind::Shift { base: vec![0.0, 0.0], direction: vec![1.0, 1.0], magnitude: 1e6 },
            0.1,
        );
        let out = contaminate(&s, &spec, RngStream::new(6, 0)).unwrap();
        assert!(norm(&out.mean()) >= 1e4);
    }

    #[test]
    fn budget_errors() {
        let s = clean(10, 1, 7);
        for eps in [0.5, 0.7, -0.1] {
            let spec = AdversarySpec::new(AdversaryKind::Cluster { center: vec![0.0] }, eps);
            assert!(matches!(contaminate(&s, &spec, RngStream::new(0, 0)), Err(Error::Budget(_))));
        }
    }

    #[test]
    fn median_tilt_pushes_median_up() {
        let s = clean(1001, 1, 8);
        let spec = AdversarySpec::new(AdversaryKind::MedianTilt { direction: vec![1.0], offset: 0.01 }, 0.2);
        let out = contaminate(&s, &spec, RngStream::new(0, 0)).unwrap();
        let before = median(&s.column(0)).unwrap();
        let after = median(&out.column(0)).unwrap();
        assert!(after > before + 0.2, "{before} -> {after}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn exact_budget_every_kind(n in 20usize..200, eps in 0.0f64..0.49, seed in any::<u64>(), which in 0usize..4) {
            let s = clean(n, 3, seed);
            let kind = all_kinds(3).swap_remove(which);
            let out = contaminate(&s, &AdversarySpec::new(kind, eps), RngStream::new(seed, 1)).unwrap();
            let budget = (eps * n as f64 + 1e-9).floor() as usize;
            prop_assert_eq!(out.row_hamming(&s), budget);
        }

        #[test]
        fn sandwich_of_directional_medians(seed in any::<u64>(), eps in 0.01f64..0.3, angle in 0.0f64..6.283, which in 0usize..4) {
            let s = clean(301, 2, seed);
            let kind = all_kinds(2).swap_remove(which);
            let out = contaminate(&s, &AdversarySpec::new(kind, eps), RngStream::new(seed, 2)).unwrap();
            let v = [angle.cos(), angle.sin()];
            let clean_proj: Vec<f64> = s.rows().map(|r| dot(r, &v)).collect();
            let med = median(&out.project(&v)).unwrap();
            let lo = quantile(&clean_proj, 0.5 - eps).unwrap();
            let hi = quantile(&clean_proj, 0.5 + eps).unwrap();
            prop_assert!(lo <= med && med <= hi, "{} <= {} <= {}", lo, med, hi);
        }
    }
}
