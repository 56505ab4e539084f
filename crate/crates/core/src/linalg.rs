//! Small dense matrices and rank-k tensors over a generic [`Scalar`].
//!
//! Every frame in scope has at most seven legs, so the solvers are plain
//! Gauss-Jordan with exact pivoting for rationals and partial pivoting for
//! floats. Symmetric eigenvalues go through nalgebra on the `f64` side.

use crate::error::CoreError;
use crate::scalar::Scalar;
use nalgebra::DMatrix;


#[derive(Debug, Clone, PartialEq)]
pub struct Mat<S> {
    pub rows: usize,
    pub cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Mat<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![S::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<S>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Mat { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    pub fn from_diag(diag: &[S]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = d.clone();
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].clone();
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)].clone();
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)].clone() + a.clone() * other[(k, j)].clone();
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[S]) -> Vec<S> {
        assert_eq!(self.cols, v.len(), "shape mismatch");
        (0..self.rows)
            .map(|i| {
                let mut acc = S::zero();
                for j in 0..self.cols {
                    acc = acc + self[(i, j)].clone() * v[j].clone();
                }
                acc
            })
            .collect()
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.clone() + b.clone())
            .collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.clone() - b.clone())
            .collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, s: &S) -> Self {
        let data = self.data.iter().map(|a| a.clone() * s.clone()).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }

    pub fn max_abs(&self) -> f64 {
        self.data
            .iter()
            .map(|x| x.to_f64().abs())
            .fold(0.0, f64::max)
    }

    /// Gauss-Jordan inverse; exact over rationals.
    pub fn inverse(&self) -> Result<Self, CoreError> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        for col in 0..n {
            let pivot = (col..n)
                .filter(|&r| !a[(r, col)].is_zero())
                .max_by(|&r1, &r2| {
                    a[(r1, col)]
                        .to_f64()
                        .abs()
                        .partial_cmp(&a[(r2, col)].to_f64().abs())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .ok_or(CoreError::SingularMatrix)?;
            if pivot != col {
                a.swap_rows(pivot, col);
                inv.swap_rows(pivot, col);
            }
            let p = a[(col, col)].clone();
            for j in 0..n {
                a[(col, j)] = a[(col, j)].clone() / p.clone();
                inv[(col, j)] = inv[(col, j)].clone() / p.clone();
            }
            for r in 0..n {
                if r == col || a[(r, col)].is_zero() {
                    continue;
                }
                let f = a[(r, col)].clone();
                for j in 0..n {
                    a[(r, j)] = a[(r, j)].clone() - f.clone() * a[(col, j)].clone();
                    inv[(r, j)] = inv[(r, j)].clone() - f.clone() * inv[(col, j)].clone();
                }
            }
        }
        Ok(inv)
    }

    /// Lower-triangular Cholesky factor of a symmetric positive-definite
    /// matrix. Fails over rationals when a pivot is not a perfect square.
    pub fn cholesky(&self) -> Result<Self, CoreError> {
        assert_eq!(self.rows, self.cols);
        if !self.is_symmetric() {
            return Err(CoreError::NotSymmetric);
        }
        let n = self.rows;
        let mut l = Self::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut acc = self[(i, j)].clone();
                for k in 0..j {
                    acc = acc - l[(i, k)].clone() * l[(j, k)].clone();
                }
                if i == j {
                    if acc.to_f64() <= 0.0 {
                        return Err(CoreError::NotPositiveDefinite);
                    }
                    l[(i, j)] = acc.try_sqrt().ok_or(CoreError::InexactSqrt)?;
                } else {
                    l[(i, j)] = acc / l[(j, j)].clone();
                }
            }
        }
        Ok(l)
    }

    fn swap_rows(&mut self, r1: usize, r2: usize) {
        if r1 == r2 {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(r1 * self.cols + j, r2 * self.cols + j);
        }
    }

    /// Rank of the row span; used by the stratification grading checks.
    pub fn rank(&self) -> usize {
        let mut a = self.clone();
        let mut rank = 0;
        for col in 0..a.cols {
            if rank == a.rows {
                break;
            }
            let pivot = (rank..a.rows)
                .filter(|&r| !a[(r, col)].is_zero())
                .max_by(|&r1, &r2| {
                    a[(r1, col)]
                        .to_f64()
                        .abs()
                        .partial_cmp(&a[(r2, col)].to_f64().abs())
                        .unwrap_or(std::cmp::Ordering::Equal)
                });
            let Some(pivot) = pivot else { continue };
            a.swap_rows(pivot, rank);
            let p = a[(rank, col)].clone();
            for j in col..a.cols {
                a[(rank, j)] = a[(rank, j)].clone() / p.clone();
            }
            for r in 0..a.rows {
                if r == rank || a[(r, col)].is_zero() {
                    continue;
                }
                let f = a[(r, col)].clone();
                for j in col..a.cols {
                    a[(r, j)] = a[(r, j)].clone() - f.clone() * a[(rank, j)].clone();
                }
            }
            rank += 1;
        }
        rank
    }

    pub fn to_f64(&self) -> Mat<f64> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x.to_f64()).collect(),
        }
    }
}

impl<S> std::ops::Index<(usize, usize)> for Mat<S> {
    type Output = S;
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.data[i * self.cols + j]
    }
}

impl<S> std::ops::IndexMut<(usize, usize)> for Mat<S> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigenvalues of a symmetric `f64` matrix, ascending.
pub fn sym_eigenvalues(m: &Mat<f64>) -> Vec<f64> {
    let n = m.rows;
    let dm = DMatrix::from_fn(n, n, |i, j| m[(i, j)]);
    let sym = dm.symmetric_eigen();
    let mut ev: Vec<f64> = sym.eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

/// Matrix exponential by scaling and squaring with a Taylor core.
pub fn mat_exp(m: &Mat<f64>) -> Mat<f64> {
    let n = m.rows;
    assert_eq!(n, m.cols);
    let norm = (0..n)
        .map(|i| (0..n).map(|j| m[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scale = 0.5_f64.powi(squarings as i32);
    let a = m.scale(&scale);
    let mut result = Mat::<f64>::identity(n);
    let mut term = Mat::<f64>::identity(n);
    for k in 1..=16 {
        term = term.matmul(&a).scale(&(1.0 / k as f64));
        result = result.add(&term);
        if term.max_abs() < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    result
}

/// Dense rank-3 tensor `t[i][j][k]` with uniform leg size.
#[derive(Debug, Clone, PartialEq)]
pub struct T3<S> {
    pub n: usize,
    data: Vec<S>,
}

impl<S: Scalar> T3<S> {
    pub fn zeros(n: usize) -> Self {
        T3 { n, data: vec![S::zero(); n * n * n] }
    }

    pub fn max_abs(&self) -> f64 {
        self.data
            .iter()
            .map(|x| x.to_f64().abs())
            .fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> T3<T> {
        T3 { n: self.n, data: self.data.iter().map(f).collect() }
    }
}

impl<S> std::ops::Index<(usize, usize, usize)> for T3<S> {
    type Output = S;
    fn index(&self, (i, j, k): (usize, usize, usize)) -> &S {
        &self.data[(i * self.n + j) * self.n + k]
    }
}

impl<S> std::ops::IndexMut<(usize, usize, usize)> for T3<S> {
    fn index_mut(&mut self, (i, j, k): (usize, usize, usize)) -> &mut S {
        &mut self.data[(i * self.n + j) * self.n + k]
    }
}

/// Dense rank-4 tensor `t[l][i][j][k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct T4<S> {
    pub n: usize,
    data: Vec<S>,
}

impl<S: Scalar> T4<S> {
    pub fn zeros(n: usize) -> Self {
        T4 { n, data: vec![S::zero(); n * n * n * n] }
    }

    pub fn max_abs(&self) -> f64 {
        self.data
            .iter()
            .map(|x| x.to_f64().abs())
            .fold(0.0, f64::max)
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> T4<T> {
        T4 { n: self.n, data: self.data.iter().map(f).collect() }
    }
}

impl<S> std::ops::Index<(usize, usize, usize, usize)> for T4<S> {
    type Output = S;
    fn index(&self, (l, i, j, k): (usize, usize, usize, usize)) -> &S {
        &self.data[((l * self.n + i) * self.n + j) * self.n + k]
    }
}

impl<S> std::ops::IndexMut<(usize, usize, usize, usize)> for T4<S> {
    fn index_mut(&mut self, (l, i, j, k): (usize, usize, usize, usize)) -> &mut S {
        &mut self.data[((l * self.n + i) * self.n + j) * self.n + k]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rat, Rational};

    #[test]
    fn exact_inverse() {
        let m = Mat::from_rows(vec![
            vec![rat(1, 1), rat(2, 1)],
            vec![rat(3, 1), rat(4, 1)],
        ]);
        let inv = m.inverse().unwrap();
        assert_eq!(m.matmul(&inv), Mat::<Rational>::identity(2));
    }

    #[test]
    fn cholesky_perfect_square() {
        let m = Mat::from_diag(&[rat(4, 1), rat(9, 1)]);
        let l = m.cholesky().unwrap();
        assert_eq!(l[(0, 0)], rat(2, 1));
        assert_eq!(l[(1, 1)], rat(3, 1));
        assert!(Mat::from_diag(&[rat(2, 1)]).cholesky().is_err());
    }

    #[test]
    fn exp_of_nilpotent() {
        let mut m = Mat::<f64>::zeros(2, 2);
        m[(0, 1)] = 3.0;
        let e = mat_exp(&m);
        assert!((e[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((e[(0, 1)] - 3.0).abs() < 1e-14);
        assert!((e[(1, 0)]).abs() < 1e-14);
    }

    #[test]
    fn rank_detects_span() {
        let m = Mat::from_rows(vec![
            vec![1.0, 0.0, 1.0],
            vec![0.0, 1.0, 1.0],
            vec![1.0, 1.0, 2.0],
        ]);
        assert_eq!(m.rank(), 2);
    }
}
