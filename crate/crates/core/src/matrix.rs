//! Dense square matrices and the handful of linear-algebra routines the
//! measure and verification code needs.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense `n x n` matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from rows, rejecting ragged, empty, non-square or
    /// non-finite input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::NotSquare { rows: 0, cols: 0 });
        }
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            let row = row.as_ref();
            if row.len() != n {
                return Err(Error::NotSquare { rows: n, cols: row.len() });
            }
            data.extend_from_slice(row);
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix entries"));
        }
        Ok(Self { n, data })
    }

    /// Builds a matrix from a row-major slice of length `n * n`.
    pub fn from_row_slice(n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * n || n == 0 {
            return Err(Error::Dimension { expected: n * n, got: data.len() });
        }
        Ok(Self { n, data: data.to_vec() })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { n: self.n, data: self.data.iter().map(|v| v * c).collect() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self { n: self.n, data })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self { n: self.n, data })
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n {
            return Err(Error::Dimension { expected: self.n, got: v.len() });
        }
        Ok(self
            .data
            .chunks(self.n)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `(A + A^T) / 2`.
    pub fn symmetric_part(&self) -> Self {
        let mut s = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                s[(i, j)] = 0.5 * (self[(i, j)] + self[(j, i)]);
            }
        }
        s
    }

    /// Induced 1-norm: maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Induced infinity-norm: maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        self.data
            .chunks(self.n)
            .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Induced 2-norm (largest singular value).
    pub fn norm_two(&self) -> Result<f64> {
        let gram = self.transpose().mul(self)?;
        let top = gram.symmetric_eigenvalues(JACOBI_TOL)?.into_iter().fold(0.0, f64::max);
        Ok(top.max(0.0).sqrt())
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting. `None` when
    /// a pivot vanishes.
    pub fn inverse(&self) -> Option<Self> {
        let n = self.n;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        let scale = self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return None;
        }
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| a[(i, col)].abs().total_cmp(&a[(j, col)].abs()))
                .unwrap_or(col);
            if a[(pivot, col)].abs() <= f64::EPSILON * scale * 1e-4 {
                return None;
            }
            if pivot != col {
                a.swap_rows(pivot, col);
                inv.swap_rows(pivot, col);
            }
            let p = a[(col, col)];
            for j in 0..n {
                a[(col, j)] /= p;
                inv[(col, j)] /= p;
            }
            for i in 0..n {
                if i == col {
                    continue;
                }
                let f = a[(i, col)];
                if f == 0.0 {
                    continue;
                }
                for j in 0..n {
                    a[(i, j)] -= f * a[(col, j)];
                    inv[(i, j)] -= f * inv[(col, j)];
                }
            }
        }
        inv.is_finite().then_some(inv)
    }

    /// Determinant via LU with partial pivoting.
    pub fn determinant(&self) -> f64 {
        let n = self.n;
        let mut a = self.clone();
        let mut det = 1.0;
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| a[(i, col)].abs().total_cmp(&a[(j, col)].abs()))
                .unwrap_or(col);
            if a[(pivot, col)] == 0.0 {
                return 0.0;
            }
            if pivot != col {
                a.swap_rows(pivot, col);
                det = -det;
            }
            let p = a[(col, col)];
            det *= p;
            for i in col + 1..n {
                let f = a[(i, col)] / p;
                for j in col..n {
                    a[(i, j)] -= f * a[(col, j)];
                }
            }
        }
        det
    }

    /// Eigenvalues of the symmetric part of `self` by cyclic Jacobi
    /// rotations, sorted ascending. Stops once the off-diagonal Frobenius
    /// mass falls below `tol` relative to the whole matrix.
    pub fn symmetric_eigenvalues(&self, tol: f64) -> Result<Vec<f64>> {
        let n = self.n;
        let mut a = self.symmetric_part();
        if n == 1 {
            return Ok(vec![a[(0, 0)]]);
        }
        let frob: f64 = a.data.iter().map(|v| v * v).sum::<f64>().sqrt();
        let threshold = tol * frob.max(f64::MIN_POSITIVE);
        for _ in 0..JACOBI_MAX_SWEEPS {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[(i, j)] * a[(i, j)])
                .sum::<f64>()
                .sqrt();
            if off <= threshold {
                let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
                eig.sort_by(f64::total_cmp);
                return Ok(eig);
            }
            for p in 0..n - 1 {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    if apq.abs() <= f64::MIN_POSITIVE {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
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
                }
            }
        }
        Err(Error::NoConvergence { what: "Jacobi eigensolver", iterations: JACOBI_MAX_SWEEPS })
    }

    /// Largest real part over the (complex) spectrum.
    pub fn spectral_abscissa(&self) -> Result<f64> {
        let m = nalgebra::DMatrix::from_row_slice(self.n, self.n, &self.data);
        let schur = nalgebra::linalg::Schur::try_new(m, f64::EPSILON, SCHUR_MAX_ITER)
            .ok_or(Error::NoConvergence { what: "Schur decomposition", iterations: SCHUR_MAX_ITER })?;
        Ok(schur
            .complex_eigenvalues()
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max))
    }

    /// Unit eigenvector (real part) for the eigenvalue with largest real part.
    pub fn dominant_real_eigenvector(&self) -> Option<Vec<f64>> {
        let lambda = self.spectral_abscissa().ok()?;
        // Null vector of (A - lambda I) via inverse iteration.
        let mut shifted = self.clone();
        for i in 0..self.n {
            shifted[(i, i)] -= lambda + 1e-10 * (1.0 + lambda.abs());
        }
        let inv = shifted.inverse()?;
        let mut v = vec![1.0; self.n];
        for _ in 0..8 {
            let w = inv.mul_vec(&v).ok()?;
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !norm.is_finite() || norm == 0.0 {
                return None;
            }
            v = w.into_iter().map(|x| x / norm).collect();
        }
        Some(v)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        let n = self.n;
        for j in 0..n {
            self.data.swap(a * n + j, b * n + j);
        }
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::Dimension { expected: self.n, got: other.n });
        }
        Ok(())
    }
}

pub(crate) const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;
const SCHUR_MAX_ITER: usize = 10_000;

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        m.rows()
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.data.chunks(self.n)).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_and_non_finite() {
        assert!(matches!(
            Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]),
            Err(Error::NotSquare { .. })
        ));
        assert!(matches!(
            Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![3.0, 4.0, 5.0]]),
            Err(Error::NotSquare { .. })
        ));
        assert_eq!(
            Matrix::from_rows(&[vec![f64::NAN]]),
            Err(Error::NonFinite("matrix entries"))
        );
    }

    #[test]
    fn inverse_roundtrip() {
        let a = Matrix::from_rows(&[[4.0, 1.0, 0.5], [2.0, 3.0, -1.0], [0.0, 1.0, 2.0]]).unwrap();
        let inv = a.inverse().unwrap();
        let prod = a.mul(&inv).unwrap();
        let id = Matrix::identity(3);
        for (x, y) in prod.as_slice().iter().zip(id.as_slice()) {
            assert!((x - y).abs() < 1e-14);
        }
        assert!(Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap().inverse().is_none());
    }

    #[test]
    fn determinant_small() {
        let a = Matrix::from_rows(&[[2.0, 1.0], [1.0, 3.0]]).unwrap();
        assert!((a.determinant() - 5.0).abs() < 1e-14);
        let s = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert!((s.determinant() + 1.0).abs() < 1e-14);
    }

    #[test]
    fn jacobi_matches_closed_form_2x2() {
        // eigenvalues of [[a, b], [b, c]]: (a+c)/2 +- sqrt(((a-c)/2)^2 + b^2)
        let (a, b, c) = (1.5, -0.7, -2.0);
        let m = Matrix::from_rows(&[[a, b], [b, c]]).unwrap();
        let eig = m.symmetric_eigenvalues(1e-14).unwrap();
        let mid = 0.5 * (a + c);
        let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        assert!((eig[0] - (mid - rad)).abs() < 1e-13);
        assert!((eig[1] - (mid + rad)).abs() < 1e-13);
    }

    #[test]
    fn spectral_abscissa_rotation() {
        let m = Matrix::from_rows(&[[-1.0, 2.0], [-2.0, -1.0]]).unwrap();
        assert!((m.spectral_abscissa().unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn norms() {
        let a = Matrix::from_rows(&[[-2.0, 2.0], [1.0, -4.0]]).unwrap();
        assert_eq!(a.norm_one(), 6.0);
        assert_eq!(a.norm_inf(), 5.0);
        let d = Matrix::from_diag(&[3.0, -5.0]);
        assert!((d.norm_two().unwrap() - 5.0).abs() < 1e-12);
    }
}
