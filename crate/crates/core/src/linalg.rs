//! Small dense linear algebra: packed symmetric matrices, square dense
//! matrices and a cyclic Jacobi eigensolver.
//!
//! The matrices handled here are n×n with n the hypersurface dimension
//! (rarely above 6), so the Jacobi method is both accurate and fast enough.

use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::scalar::{lit, Scalar};

/// Square dense matrix in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DenseMatrix<T: Scalar> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let n = self.n;
        Self::from_fn(n, |i, j| (0..n).map(|k| self[(i, k)] * other[(k, j)]).sum())
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| (0..self.n).map(|k| self[(i, k)] * v[k]).sum())
            .collect()
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.n).map(|i| self[(i, j)]).collect()
    }

    /// Quadratic form vᵀ M v.
    pub fn quadratic_form(&self, v: &[T]) -> T {
        crate::scalar::dot(v, &self.matvec(v))
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        self.data.chunks(self.n.max(1)).map(|r| r.to_vec()).collect()
    }
}

impl<T: Scalar> std::ops::Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T: Scalar> std::ops::IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

/// Symmetric n×n matrix stored as its packed upper triangle, so symmetry is
/// exact by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SymMatrix<T: Scalar> {
    n: usize,
    upper: Vec<T>,
}

#[inline]
fn packed_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

impl<T: Scalar> SymMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            upper: vec![T::zero(); n * (n + 1) / 2],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![T::one(); n])
    }

    pub fn diagonal(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    /// Builds from a closure evaluated on the upper triangle only.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Symmetrizes a dense matrix as (M + Mᵀ)/2.
    pub fn from_dense(m: &DenseMatrix<T>) -> Self {
        let half = lit::<T>(0.5);
        Self::from_fn(m.dim(), |i, j| half * (m[(i, j)] + m[(j, i)]))
    }

    /// Builds from row vectors; rows must form a square matrix.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(FlowError::Dimension {
                expected: n,
                got: bad.len(),
            });
        }
        Ok(Self::from_dense(&DenseMatrix::from_fn(n, |i, j| rows[i][j])))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.upper[packed_index(self.n, i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let k = packed_index(self.n, i, j);
        self.upper[k] = v;
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        DenseMatrix::from_fn(self.n, |i, j| self.get(i, j))
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            n: self.n,
            upper: self.upper.iter().map(|&v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        Self {
            n: self.n,
            upper: self
                .upper
                .iter()
                .zip(&other.upper)
                .map(|(&a, &b)| a + b)
                .collect(),
        }
    }

    /// A + s·B.
    pub fn axpy(&self, s: T, other: &Self) -> Self {
        self.add(&other.scale(s))
    }

    pub fn trace(&self) -> T {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> T {
        let mut s = T::zero();
        for i in 0..self.n {
            for j in 0..self.n {
                let v = self.get(i, j);
                s = s + v * v;
            }
        }
        s.sqrt()
    }

    /// Qᵀ A Q.
    pub fn conjugate(&self, q: &DenseMatrix<T>) -> Self {
        let a = self.to_dense();
        let qt = q.transpose();
        Self::from_dense(&qt.matmul(&a).matmul(q))
    }

    /// Q A Qᵀ, the inverse of [`Self::conjugate`] for orthogonal Q.
    pub fn conjugate_transpose(&self, q: &DenseMatrix<T>) -> Self {
        self.conjugate(&q.transpose())
    }

    /// Product A·B·A of symmetric matrices (symmetric result).
    pub fn sandwich(&self, b: &Self) -> Self {
        let a = self.to_dense();
        Self::from_dense(&a.matmul(&b.to_dense()).matmul(&a))
    }

    pub fn eigen(&self) -> Result<SymEigen<T>> {
        jacobi_eigen(self)
    }

    pub fn eigenvalues(&self) -> Result<Vec<T>> {
        Ok(self.eigen()?.values)
    }

    /// Inverse of a positive definite matrix via its spectral decomposition.
    pub fn inverse_spd(&self) -> Result<Self> {
        let e = self.eigen()?;
        let min = e.values.first().copied().unwrap_or_else(T::one);
        if min <= T::zero() {
            return Err(FlowError::NotPositiveDefinite {
                min_eigenvalue: crate::scalar::to_f64(min),
            });
        }
        let inv: Vec<T> = e.values.iter().map(|&l| T::one() / l).collect();
        Ok(SymMatrix::diagonal(&inv).conjugate_transpose(&e.vectors))
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        self.to_dense().rows()
    }
}

/// Spectral decomposition A = Q diag(values) Qᵀ with ascending eigenvalues;
/// the columns of `vectors` are the eigenvectors.
#[derive(Debug, Clone)]
pub struct SymEigen<T: Scalar> {
    pub values: Vec<T>,
    pub vectors: DenseMatrix<T>,
}

const MAX_SWEEPS: usize = 100;

fn jacobi_eigen<T: Scalar>(m: &SymMatrix<T>) -> Result<SymEigen<T>> {
    let n = m.dim();
    let mut a = m.to_dense();
    let mut v = DenseMatrix::identity(n);
    let scale = m.frobenius_norm();
    if n <= 1 || scale == T::zero() {
        return Ok(finish(a, v));
    }
    let tol = T::epsilon() * scale;
    for _ in 0..MAX_SWEEPS {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off = off + a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= tol {
            return Ok(finish(a, v));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= T::min_positive_value() {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (lit::<T>(2.0) * apq);
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
    Err(FlowError::EigenFailure { sweeps: MAX_SWEEPS })
}

fn finish<T: Scalar>(a: DenseMatrix<T>, v: DenseMatrix<T>) -> SymEigen<T> {
    let n = a.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DenseMatrix::from_fn(n, |r, c| v[(r, order[c])]);
    SymEigen { values, vectors }
}

/// Orthogonal matrix obtained by Gram–Schmidt on the columns of `m`.
pub fn orthonormalize<T: Scalar>(m: &DenseMatrix<T>) -> DenseMatrix<T> {
    let n = m.dim();
    let mut cols: Vec<Vec<T>> = Vec::with_capacity(n);
    for j in 0..n {
        let mut c = m.column(j);
        for _ in 0..2 {
            for prev in &cols {
                let d = crate::scalar::dot(&c, prev);
                for (x, &p) in c.iter_mut().zip(prev) {
                    *x = *x - d * p;
                }
            }
        }
        let nrm = crate::scalar::norm(&c);
        for x in c.iter_mut() {
            *x = *x / nrm;
        }
        cols.push(c);
    }
    DenseMatrix::from_fn(n, |i, j| cols[j][i])
}
