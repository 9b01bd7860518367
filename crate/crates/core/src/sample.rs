use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::scalar::Real;

/// An N×d data matrix, stored row-major.
///
/// `contaminated_idx` is ground truth written by adversaries for diagnostics.
/// No estimator reads it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample<T> {
    n: usize,
    d: usize,
    data: Vec<T>,
    pub contaminated_idx: Option<Vec<usize>>,
}

impl<T: Real> Sample<T> {
    pub fn new(n: usize, d: usize, data: Vec<T>) -> Result<Self> {
        if d == 0 {
            return Err(Error::Domain("sample dimension must be at least 1".into()));
        }
        if data.len() != n * d {
            return Err(Error::Dimension { expected: n * d, got: data.len() });
        }
        Ok(Self { n, d, data, contaminated_idx: None })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let m = Matrix::from_rows(rows)?;
        Self::new(rows.len(), d, m.as_slice().to_vec())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.data.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// `⟨xᵢ, v⟩` for every row.
    pub fn project(&self, v: &[T]) -> Vec<T> {
        self.rows().map(|r| dot(r, v)).collect()
    }

    pub fn project_into(&self, v: &[T], out: &mut Vec<T>) {
        out.clear();
        out.extend(self.rows().map(|r| dot(r, v)));
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn norms_sq(&self) -> Vec<T> {
        self.rows().map(|r| dot(r, r)).collect()
    }

    /// `xᵢ ↦ xᵢ + b` for every row.
    pub fn translated(&self, b: &[T]) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            for (x, &bj) in out.row_mut(i).iter_mut().zip(b) {
                *x = *x + bj;
            }
        }
        out
    }

    pub fn scaled(&self, a: T) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|x| *x = *x * a);
        out
    }

    /// `xᵢ ↦ M xᵢ` for every row.
    pub fn transformed(&self, m: &Matrix<T>) -> Self {
        let mut data = Vec::with_capacity(self.n * m.rows());
        for r in self.rows() {
            data.extend(m.matvec(r));
        }
        Self { n: self.n, d: m.rows(), data, contaminated_idx: self.contaminated_idx.clone() }
    }

    /// Rows whose index is not listed in `drop`.
    pub fn without_rows(&self, drop: &[usize]) -> Self {
        let mut mask = vec![false; self.n];
        for &i in drop {
            mask[i] = true;
        }
        let mut data = Vec::with_capacity((self.n - drop.len()) * self.d);
        for (i, r) in self.rows().enumerate() {
            if !mask[i] {
                data.extend_from_slice(r);
            }
        }
        Self { n: data.len() / self.d, d: self.d, data, contaminated_idx: None }
    }

    /// Appends one row (used by sensitivity checks).
    pub fn with_row(&self, row: &[T]) -> Self {
        assert_eq!(row.len(), self.d);
        let mut out = self.clone();
        out.data.extend_from_slice(row);
        out.n += 1;
        out
    }

    /// Uncentered second-moment matrix `(1/denom) Σ xᵢxᵢᵀ` over the given rows.
    pub fn second_moment(&self, rows: impl Iterator<Item = usize>, denom: T) -> Matrix<T> {
        let d = self.d;
        let mut m = Matrix::zeros(d, d);
        for i in rows {
            let r = self.row(i);
            for a in 0..d {
                for b in 0..=a {
                    m[(a, b)] = m[(a, b)] + r[a] * r[b];
                }
            }
        }
        for a in 0..d {
            for b in 0..=a {
                let v = m[(a, b)] / denom;
                m[(a, b)] = v;
                m[(b, a)] = v;
            }
        }
        m
    }

    pub fn mean(&self) -> Vec<T> {
        let mut acc = vec![T::zero(); self.d];
        for r in self.rows() {
            for (a, &x) in acc.iter_mut().zip(r) {
                *a = *a + x;
            }
        }
        let n = T::from_count(self.n);
        acc.into_iter().map(|a| a / n).collect()
    }

    /// Number of rows that differ between two samples of equal shape.
    pub fn row_hamming(&self, other: &Self) -> usize {
        assert_eq!((self.n, self.d), (other.n, other.d));
        self.rows().zip(other.rows()).filter(|(a, b)| a != b).count()
    }
}
