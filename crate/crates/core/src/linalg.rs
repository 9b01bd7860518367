//! Small dense linear algebra: row-major matrices, a cyclic Jacobi symmetric
//! eigensolver, and the PSD matrix type used for Σ, G, H and Γ.
//!
//! Dimensions in this crate are desk-scale (d ≤ a few dozen), where Jacobi is
//! both accurate and fast enough.

use std::ops::{Index, IndexMut};
use std::sync::OnceLock;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d, d);
        for i in 0..d {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diag(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &x) in diag.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension { expected: rows * cols, got: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::Dimension { expected: cols, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    /// `x xᵀ`
    pub fn outer(x: &[T]) -> Self {
        let d = x.len();
        let mut m = Self::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = x[i] * x[j];
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Dimension { expected: self.cols, got: other.rows });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] = out.data[i * other.cols + j] + a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| x * s).collect() }
    }

    /// `self + s·other`
    pub fn axpy(&self, s: T, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + s * b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius(&self) -> T {
        self.data.iter().map(|&x| x * x).sum::<T>().sqrt()
    }

    /// Frobenius inner product `tr(AᵀB)`.
    pub fn inner(&self, other: &Self) -> T {
        self.data.iter().zip(&other.data).map(|(&a, &b)| a * b).sum()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }

    pub fn symmetrized(&self) -> Self {
        let mut s = self.clone();
        let half = T::lit(0.5);
        for i in 0..self.rows {
            for j in 0..i {
                let v = (self[(i, j)] + self[(j, i)]) * half;
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        s
    }

    /// `xᵀ M x`
    pub fn quad_form(&self, x: &[T]) -> T {
        let mut acc = T::zero();
        for i in 0..self.rows {
            acc = acc + x[i] * dot(self.row(i), x);
        }
        acc
    }

    /// Symmetric eigendecomposition by cyclic Jacobi rotations. Only the lower
    /// triangle is trusted; eigenvalues are returned in ascending order.
    pub fn sym_eigen(&self) -> SymEigen<T> {
        assert!(self.is_square(), "eigendecomposition of non-square matrix");
        let n = self.rows;
        let mut a = self.symmetrized();
        let mut v = Self::identity(n);
        let scale = a.frobenius();
        if scale == T::zero() || n == 1 {
            return SymEigen { values: (0..n).map(|i| a[(i, i)]).collect(), vectors: v };
        }
        let tol = T::epsilon() * scale * T::lit(0.01);
        for _sweep in 0..100 {
            let off: T = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[(i, j)] * a[(i, j)])
                .sum::<T>()
                .sqrt();
            if off <= tol {
                break;
            }
            for p in 0..n - 1 {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    if apq == T::zero() {
                        continue;
                    }
                    let app = a[(p, p)];
                    let aqq = a[(q, q)];
                    let theta = (aqq - app) / (T::lit(2.0) * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap_or(std::cmp::Ordering::Equal));
        let values = order.iter().map(|&i| a[(i, i)]).collect();
        let mut vectors = Self::zeros(n, n);
        for (new_col, &old_col) in order.iter().enumerate() {
            for k in 0..n {
                vectors[(k, new_col)] = v[(k, old_col)];
            }
        }
        SymEigen { values, vectors }
    }

    /// Applies `f` to the eigenvalues of a symmetric matrix.
    pub fn map_spectrum(&self, f: impl Fn(T) -> T) -> Self {
        let e = self.sym_eigen();
        let mapped: Vec<T> = e.values.iter().map(|&x| f(x)).collect();
        Self::from_eigen(&mapped, &e.vectors)
    }

    /// `V diag(values) Vᵀ`, exactly symmetric.
    pub fn from_eigen(values: &[T], vectors: &Self) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut acc = T::zero();
                for (k, &lam) in values.iter().enumerate() {
                    acc = acc + vectors[(i, k)] * lam * vectors[(j, k)];
                }
                m[(i, j)] = acc;
                m[(j, i)] = acc;
            }
        }
        m
    }

    /// Spectral norm of a symmetric matrix.
    pub fn sym_op_norm(&self) -> T {
        let e = self.sym_eigen();
        e.values.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Real> Serialize for Matrix<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("Matrix", 3)?;
        st.serialize_field("rows", &self.rows)?;
        st.serialize_field("cols", &self.cols)?;
        st.serialize_field("data", &self.data)?;
        st.end()
    }
}

#[derive(Debug, Clone)]
pub struct SymEigen<T> {
    /// Ascending.
    pub values: Vec<T>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: Matrix<T>,
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Relative tolerance under which slightly negative eigenvalues are treated as
/// round-off and clipped to zero.
pub fn psd_tolerance<T: Real>() -> T {
    T::lit(1e-10).max(T::epsilon() * T::lit(64.0))
}

/// Symmetric positive semi-definite matrix with a lazily cached
/// eigendecomposition and square root.
#[derive(Debug)]
pub struct SpdMatrix<T> {
    m: Matrix<T>,
    eigen: OnceLock<SymEigen<T>>,
    sqrt: OnceLock<Matrix<T>>,
}

impl<T: Real> Clone for SpdMatrix<T> {
    fn clone(&self) -> Self {
        Self { m: self.m.clone(), eigen: self.eigen.clone(), sqrt: self.sqrt.clone() }
    }
}

impl<T: Real> PartialEq for SpdMatrix<T> {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m
    }
}

impl<T: Real> SpdMatrix<T> {
    /// Validates an exactly symmetric matrix. Eigenvalues in
    /// `[-1e-10·‖M‖, 0)` are clipped to zero in the cached factorization;
    /// anything more negative is rejected.
    pub fn new(m: Matrix<T>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidModel(format!("{}x{} matrix is not square", m.rows(), m.cols())));
        }
        if !m.is_symmetric() {
            return Err(Error::InvalidModel("matrix is not symmetric".into()));
        }
        if m.as_slice().iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidModel("matrix has non-finite entries".into()));
        }
        let e = m.sym_eigen();
        let scale = e.values.iter().fold(T::zero(), |a, &x| a.max(x.abs()));
        let min = e.values.first().copied().unwrap_or(T::zero());
        if min < -psd_tolerance::<T>() * scale {
            return Err(Error::InvalidModel(format!(
                "matrix is not positive semi-definite (min eigenvalue {min})"
            )));
        }
        let out = Self { m, eigen: OnceLock::new(), sqrt: OnceLock::new() };
        let _ = out.eigen.set(clip_eigen(e));
        Ok(out)
    }

    pub fn from_symmetrized(m: &Matrix<T>) -> Result<Self> {
        Self::new(m.symmetrized())
    }

    /// Nearest PSD matrix in Frobenius norm (negative eigenvalues clipped).
    pub fn psd_projection(m: &Matrix<T>) -> Self {
        let e = m.symmetrized().sym_eigen();
        let clipped = clip_eigen(SymEigen {
            values: e.values.iter().map(|&x| x.max(T::zero())).collect(),
            vectors: e.vectors,
        });
        let m = Matrix::from_eigen(&clipped.values, &clipped.vectors);
        let out = Self { m, eigen: OnceLock::new(), sqrt: OnceLock::new() };
        let _ = out.eigen.set(clipped);
        out
    }

    pub fn identity(d: usize) -> Self {
        Self::new(Matrix::identity(d)).expect("identity is PSD")
    }

    pub fn zeros(d: usize) -> Self {
        Self::new(Matrix::zeros(d, d)).expect("zero is PSD")
    }

    pub fn diag(values: &[T]) -> Result<Self> {
        Self::new(Matrix::from_diag(values))
    }

    pub fn dim(&self) -> usize {
        self.m.rows()
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.m
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.m
    }

    /// Eigendecomposition with round-off negatives clipped to zero.
    pub fn eigen(&self) -> &SymEigen<T> {
        self.eigen.get_or_init(|| clip_eigen(self.m.sym_eigen()))
    }

    /// Symmetric square root `M^{1/2}`.
    pub fn sqrt(&self) -> &Matrix<T> {
        self.sqrt.get_or_init(|| {
            let e = self.eigen();
            let roots: Vec<T> = e.values.iter().map(|&x| x.sqrt()).collect();
            Matrix::from_eigen(&roots, &e.vectors)
        })
    }

    pub fn op_norm(&self) -> T {
        self.eigen().values.last().copied().unwrap_or(T::zero())
    }

    pub fn min_eigenvalue(&self) -> T {
        self.eigen().values.first().copied().unwrap_or(T::zero())
    }

    pub fn trace(&self) -> T {
        self.m.trace()
    }

    /// `tr(M)/‖M‖`; zero for the zero matrix.
    pub fn effective_rank(&self) -> T {
        let op = self.op_norm();
        if op == T::zero() {
            T::zero()
        } else {
            self.trace() / op
        }
    }

    pub fn quad_form(&self, x: &[T]) -> T {
        self.m.quad_form(x)
    }

    pub fn scale(&self, s: T) -> Self {
        assert!(s >= T::zero(), "PSD matrices scale by non-negative factors");
        Self { m: self.m.scale(s), eigen: OnceLock::new(), sqrt: OnceLock::new() }
    }

    /// Smallest eigenvalue of `other − self`, i.e. the Loewner margin of
    /// `self ⪯ other`.
    pub fn loewner_margin(&self, other: &Self) -> T {
        other.m.sub(&self.m).sym_eigen().values[0]
    }
}

fn clip_eigen<T: Real>(e: SymEigen<T>) -> SymEigen<T> {
    SymEigen { values: e.values.into_iter().map(|x| x.max(T::zero())).collect(), vectors: e.vectors }
}

impl<T: Real> Serialize for SpdMatrix<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("SpdMatrix", 2)?;
        st.serialize_field("d", &self.dim())?;
        st.serialize_field("data", self.m.as_slice())?;
        st.end()
    }
}

impl<'de, T: Real + serde::Deserialize<'de>> serde::Deserialize<'de> for SpdMatrix<T> {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(serde::Deserialize)]
        struct Raw<T> {
            d: usize,
            data: Vec<T>,
        }
        let raw = Raw::<T>::deserialize(deserializer)?;
        let m = Matrix::from_row_major(raw.d, raw.d, raw.data).map_err(serde::de::Error::custom)?;
        SpdMatrix::new(m).map_err(serde::de::Error::custom)
    }
}

/// A random orthogonal matrix (QR of a Gaussian matrix via Gram–Schmidt).
pub fn random_orthogonal<T: Real, R: rand::Rng + ?Sized>(d: usize, rng: &mut R) -> Matrix<T> {
    let mut cols: Vec<Vec<T>> = Vec::with_capacity(d);
    while cols.len() < d {
        let mut v: Vec<T> = crate::rng::std_normal_vec(rng, d);
        for c in &cols {
            let p = dot(&v, c);
            for (vi, &ci) in v.iter_mut().zip(c) {
                *vi = *vi - p * ci;
            }
        }
        let n = norm(&v);
        if n > T::lit(1e-6) {
            cols.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    let mut q = Matrix::zeros(d, d);
    for (j, c) in cols.iter().enumerate() {
        for i in 0..d {
            q[(i, j)] = c[i];
        }
    }
    q
}
