// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::C64;
use crate::error::{Error, Result};

/// Dense complex matrix with value semantics.
///
/// Public constructors reject non-finite entries. Every operation returns a
/// fresh value; nothing mutates in place once a matrix has been handed out.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    inner: DMatrix<C64>,
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries.
    pub fn new(rows: usize, cols: usize, entries: Vec<C64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::dims(format!("{} entries", rows * cols), format!("{} entries", entries.len())));
        }
        for (k, z) in entries.iter().enumerate() {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::NonFinite { row: k / cols.max(1), col: k % cols.max(1) });
            }
        }
        Ok(Self { inner: DMatrix::from_row_slice(rows, cols, &entries) })
    }

    /// Builds a matrix from nested rows. All rows must share one length.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::dims(format!("rows of length {cols}"), format!("row of length {}", bad.len())));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    /// Real-valued convenience constructor, row-major.
    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        Self::new(rows, cols, entries.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self::from_inner(DMatrix::from_fn(rows, cols, f))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_inner(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self::from_inner(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        Self::from_inner(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d: Vec<C64> = diag.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::from_diagonal(&d)
    }

    /// Matrix whose columns are the given vectors (all of length `rows`).
    pub fn from_columns(rows: usize, columns: &[Vec<C64>]) -> Self {
        Self::from_fn(rows, columns.len(), |i, j| columns[j][i])
    }

    /// The matrix unit E_ij of size d.
    pub fn unit(d: usize, i: usize, j: usize) -> Self {
        Self::from_fn(d, d, |r, c| if r == i && c == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
    }

    pub(crate) fn from_inner(inner: DMatrix<C64>) -> Self {
        Self { inner }
    }

    pub(crate) fn inner(&self) -> &DMatrix<C64> {
        &self.inner
    }

    pub fn rows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn cols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.inner[(i, j)]
    }

    /// Row-major copy of the entries.
    pub fn to_row_major(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.inner[(i, j)]);
            }
        }
        out
    }

    pub fn to_rows(&self) -> Vec<Vec<C64>> {
        (0..self.rows()).map(|i| (0..self.cols()).map(|j| self.inner[(i, j)]).collect()).collect()
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        self.inner.column(j).iter().copied().collect()
    }

    pub fn columns(&self) -> Vec<Vec<C64>> {
        (0..self.cols()).map(|j| self.column(j)).collect()
    }

    /// Columns `start..start + len` as a new matrix.
    pub fn column_block(&self, start: usize, len: usize) -> Self {
        Self::from_inner(self.inner.columns(start, len).into_owned())
    }

    pub fn adjoint(&self) -> Self {
        Self::from_inner(self.inner.adjoint())
    }

    pub fn transpose(&self) -> Self {
        Self::from_inner(self.inner.transpose())
    }

    pub fn conj(&self) -> Self {
        Self::from_inner(self.inner.map(|z| z.conj()))
    }

    pub fn trace(&self) -> C64 {
        self.inner.trace()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_inner(&self.inner * s)
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        Self::from_inner(self.inner.kronecker(&other.inner))
    }

    /// Max-entry norm, the default comparison norm across the crate.
    pub fn max_abs(&self) -> f64 {
        self.inner.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn frobenius(&self) -> f64 {
        self.inner.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `max |self - other|` over entries; infinite when the shapes differ.
    pub fn max_diff(&self, other: &Self) -> f64 {
        if self.rows() != other.rows() || self.cols() != other.cols() {
            return f64::INFINITY;
        }
        self.inner.iter().zip(other.inner.iter()).fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    /// `max |M - M^dagger|`; infinite for non-square input.
    pub fn hermiticity_residual(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        self.max_diff(&self.adjoint())
    }

    /// `(M + M^dagger) / 2`.
    pub fn hermitian_part(&self) -> Self {
        Self::from_inner((&self.inner + self.inner.adjoint()) * C64::new(0.5, 0.0))
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let x = DVector::from_column_slice(v);
        (&self.inner * x).iter().copied().collect()
    }

    /// `M^n` by repeated squaring; `M^0 = I`.
    pub fn pow(&self, mut n: u64) -> Self {
        assert!(self.is_square(), "pow on non-square matrix");
        let mut result = DMatrix::identity(self.rows(), self.rows());
        let mut base = self.inner.clone();
        while n > 0 {
            if n & 1 == 1 {
                result = &result * &base;
            }
            n >>= 1;
            if n > 0 {
                base = &base * &base;
            }
        }
        Self::from_inner(result)
    }

    /// Matrix exponential (Padé approximation with scaling and squaring).
    pub fn exp(&self) -> Self {
        assert!(self.is_square(), "exp on non-square matrix");
        Self::from_inner(self.inner.clone().exp())
    }

    /// Inverse, or `None` when numerically singular.
    pub fn inverse(&self) -> Option<Self> {
        self.inner.clone().try_inverse().map(Self::from_inner)
    }

    /// Inverse of a lower-triangular matrix by forward substitution, or
    /// `None` if a diagonal entry vanishes.
    pub fn lower_triangular_inverse(&self) -> Option<Self> {
        let n = self.rows();
        self.inner.solve_lower_triangular(&DMatrix::identity(n, n)).map(Self::from_inner)
    }

    /// Row-major vectorisation: entry (i, j) lands at index `i * cols + j`.
    pub fn vec_row_major(&self) -> Vec<C64> {
        self.to_row_major()
    }

    /// Inverse of [`vec_row_major`](Self::vec_row_major) for a `d × d` matrix.
    pub fn unvec_row_major(d: usize, v: &[C64]) -> Self {
        assert_eq!(v.len(), d * d, "unvec length");
        Self::from_fn(d, d, |i, j| v[i * d + j])
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows(), self.cols())?;
        for i in 0..self.rows() {
            write!(f, "  ")?;
            for j in 0..self.cols() {
                let z = self.inner[(i, j)];
                write!(f, "{:+.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols(), rhs.rows(), "matrix product shape mismatch");
        ComplexMatrix::from_inner(&self.inner * &rhs.inner)
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix::from_inner(&self.inner + &rhs.inner)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix::from_inner(&self.inner - &rhs.inner)
    }
}

/// Serialized as row-major nested arrays of `[re, im]` pairs.
impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..self.rows())
            .map(|i| {
                (0..self.cols())
                    .map(|j| {
                        let z = self.inner[(i, j)];
                        [z.re, z.im]
                    })
                    .collect()
            })
            .collect();
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(deserializer)?;
        let rows: Vec<Vec<C64>> =
            rows.into_iter().map(|r| r.into_iter().map(|[re, im]| C64::new(re, im)).collect()).collect();
        ComplexMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Euclidean norm of a coordinate vector.
pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `<u, v>` with the conjugate on the left argument.
pub fn vec_inner(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}
