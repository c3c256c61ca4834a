//! Minimal dense row-major matrix and vector helpers.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Builds a matrix from row-major data. Panics if the length is wrong.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major buffer has wrong length");
        Self { rows, cols, data }
    }

    /// Builds a matrix from nested rows. `cols` is used when `rows` is empty.
    /// Returns `None` when rows are ragged.
    pub fn from_rows(rows: &[Vec<T>], cols: usize) -> Option<Self> {
        let cols = rows.first().map_or(cols, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return None;
        }
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Some(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[T]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.row_iter().map(<[T]>::to_vec).collect()
    }

    /// `self * v`
    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        debug_assert_eq!(v.len(), self.cols);
        self.row_iter().map(|r| dot(r, v)).collect()
    }

    /// `selfᵀ * v`
    pub fn tr_mul_vec(&self, v: &[T]) -> Vec<T> {
        debug_assert_eq!(v.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (r, &vi) in self.row_iter().zip(v) {
            if vi != T::zero() {
                axpy(vi, r, &mut out);
            }
        }
        out
    }

    /// `self * other`
    pub fn mul_mat(&self, other: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.cols, other.rows, "matrix product shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &aik) in self.row(i).iter().enumerate() {
                if aik != T::zero() {
                    axpy(aik, other.row(k), out_row);
                }
            }
        }
        out
    }

    pub fn push_row(&mut self, row: &[T]) {
        assert_eq!(row.len(), self.cols, "row length mismatch");
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
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

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// `y += alpha * x`
#[inline]
pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn norm2<T: Scalar>(v: &[T]) -> T {
    // scaled to avoid overflow on large entries
    let scale = norm_inf(v);
    if scale == T::zero() || !scale.is_finite() {
        return scale;
    }
    let s: T = v.iter().map(|&x| (x / scale) * (x / scale)).sum();
    scale * s.sqrt()
}

#[inline]
pub fn norm_inf<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()))
}

pub fn sub<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn add<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

pub fn scale<T: Scalar>(alpha: T, v: &[T]) -> Vec<T> {
    v.iter().map(|&x| alpha * x).collect()
}

/// Householder QR of a tall `n × p` matrix given by its columns.
#[derive(Debug, Clone)]
pub struct Qr<T> {
    n: usize,
    // reflectors, `vs[k]` acts on entries k..n
    vs: Vec<Vec<T>>,
    betas: Vec<T>,
    // R stored column-wise, column j has j + 1 entries
    r: Vec<Vec<T>>,
}

impl<T: Scalar> Qr<T> {
    pub fn new(columns: &[Vec<T>]) -> Self {
        let p = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        assert!(p <= n, "QR needs at least as many rows as columns");
        let mut cols: Vec<Vec<T>> = columns.to_vec();
        let mut vs = Vec::with_capacity(p);
        let mut betas = Vec::with_capacity(p);
        for k in 0..p {
            let x = &cols[k][k..];
            let xnorm = norm2(x);
            let alpha = if x[0] > T::zero() { -xnorm } else { xnorm };
            let mut v = x.to_vec();
            v[0] -= alpha;
            let vnorm2: T = v.iter().map(|&t| t * t).sum();
            let beta = if vnorm2 > T::zero() {
                T::lit(2.0) / vnorm2
            } else {
                T::zero()
            };
            if beta > T::zero() {
                for col in cols.iter_mut().skip(k) {
                    let s = beta * dot(&v, &col[k..]);
                    axpy(-s, &v, &mut col[k..]);
                }
            }
            vs.push(v);
            betas.push(beta);
        }
        let r = cols
            .iter()
            .enumerate()
            .map(|(j, c)| c[..=j].to_vec())
            .collect();
        Self { n, vs, betas, r }
    }

    pub fn ncols(&self) -> usize {
        self.r.len()
    }

    /// Smallest `|R_kk| / max |R_jj|`; zero for rank-deficient input.
    pub fn rcond_estimate(&self) -> T {
        let diag: Vec<T> = self.r.iter().enumerate().map(|(j, c)| c[j].abs()).collect();
        let max = diag.iter().fold(T::zero(), |a, &b| a.max(b));
        if max == T::zero() {
            return T::zero();
        }
        diag.iter().fold(T::infinity(), |a, &b| a.min(b)) / max
    }

    /// `Qᵀ b` for a vector of length `n`.
    pub fn apply_qt(&self, b: &mut [T]) {
        assert_eq!(b.len(), self.n);
        for (k, (v, &beta)) in self.vs.iter().zip(&self.betas).enumerate() {
            let s = beta * dot(v, &b[k..]);
            axpy(-s, v, &mut b[k..]);
        }
    }

    /// `Q y` for a vector of length `n`.
    pub fn apply_q(&self, y: &mut [T]) {
        assert_eq!(y.len(), self.n);
        for (k, (v, &beta)) in self.vs.iter().zip(&self.betas).enumerate().rev() {
            let s = beta * dot(v, &y[k..]);
            axpy(-s, v, &mut y[k..]);
        }
    }

    /// Solves `R z = c` for the leading `p` entries of `c`.
    pub fn solve_r(&self, c: &[T]) -> Vec<T> {
        let p = self.ncols();
        let mut z = c[..p].to_vec();
        for i in (0..p).rev() {
            let mut s = z[i];
            for j in i + 1..p {
                s -= self.r[j][i] * z[j];
            }
            z[i] = s / self.r[i][i];
        }
        z
    }

    /// Solves `Rᵀ y = c`.
    pub fn solve_rt(&self, c: &[T]) -> Vec<T> {
        let p = self.ncols();
        let mut y = c[..p].to_vec();
        for i in 0..p {
            let mut s = y[i];
            for (j, yj) in y.iter().enumerate().take(i) {
                s -= self.r[i][j] * *yj;
            }
            y[i] = s / self.r[i][i];
        }
        y
    }

    /// Least-squares solution of `min ‖M z - b‖`.
    pub fn least_squares(&self, b: &[T]) -> Vec<T> {
        let mut c = b.to_vec();
        self.apply_qt(&mut c);
        self.solve_r(&c)
    }
}
