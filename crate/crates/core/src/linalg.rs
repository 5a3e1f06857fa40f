//! Dense row-major matrices and least squares via Householder QR.
//!
//! The design matrices in this crate are small (at most a few dozen columns),
//! so a direct factorization with column pivoting is both fast and robust to
//! the near-collinear regressor blocks that lagged series produce.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LinalgError {
    #[error("design matrix is rank deficient (numerical rank {rank} of {cols} columns)")]
    RankDeficient { rank: usize, cols: usize },
    #[error("under-determined system: {rows} rows for {cols} columns")]
    UnderDetermined { rows: usize, cols: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self, LinalgError> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(LinalgError::ShapeMismatch("ragged rows".into()));
        }
        Ok(Self {
            rows: nrows,
            cols: ncols,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: T) {
        self.data[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// y = M x
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols, "mul_vec dimension");
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(&m, &v)| m * v).sum())
            .collect()
    }
}

/// Ordinary least squares solution with per-coefficient standard errors.
#[derive(Debug, Clone)]
pub struct LstsqFit<T> {
    pub coefficients: Vec<T>,
    /// sqrt of the diagonal of sigma^2 (X'X)^-1; zeros when rows == cols.
    pub std_errors: Vec<T>,
    pub residual_sum_squares: T,
}

/// Solve `design * beta ~ targets` by column-pivoted Householder QR.
///
/// Rank is judged against the largest pivot with a relative tolerance of
/// 1e-10 (widened for scalar types whose epsilon is coarser than that).
pub fn lstsq<T: Scalar>(design: &Mat<T>, targets: &[T]) -> Result<LstsqFit<T>, LinalgError> {
    let (rows, cols) = (design.rows(), design.cols());
    if targets.len() != rows {
        return Err(LinalgError::ShapeMismatch(format!(
            "{} targets for {} rows",
            targets.len(),
            rows
        )));
    }
    if rows < cols || cols == 0 {
        return Err(LinalgError::UnderDetermined { rows, cols });
    }

    let mut a = design.clone();
    let mut qty = targets.to_vec();
    let mut perm: Vec<usize> = (0..cols).collect();

    let rel_tol = {
        let eps = T::epsilon().to_f64_lossy();
        T::from_f64_lossy(1e-10f64.max(eps.powf(0.75)))
    };
    let mut max_pivot = T::zero();

    for k in 0..cols {
        // Pivot on the remaining column with the largest residual norm.
        let (mut best, mut best_norm) = (k, T::zero());
        for j in k..cols {
            let norm = column_norm(&a, k, j);
            if norm > best_norm {
                best = j;
                best_norm = norm;
            }
        }
        if k == 0 {
            max_pivot = best_norm;
        }
        if best_norm <= rel_tol * max_pivot {
            return Err(LinalgError::RankDeficient { rank: k, cols });
        }
        if best != k {
            swap_columns(&mut a, k, best);
            perm.swap(k, best);
        }

        // Householder reflector for column k below the diagonal.
        let x0 = a.get(k, k);
        let alpha = if x0 >= T::zero() {
            -best_norm
        } else {
            best_norm
        };
        let mut v = vec![T::zero(); rows - k];
        for (i, slot) in v.iter_mut().enumerate() {
            *slot = a.get(k + i, k);
        }
        v[0] -= alpha;
        let vtv: T = v.iter().map(|&x| x * x).sum();
        if vtv > T::zero() {
            let beta = T::from_f64_lossy(2.0) / vtv;
            for j in k..cols {
                let dot: T = v
                    .iter()
                    .enumerate()
                    .map(|(i, &vi)| vi * a.get(k + i, j))
                    .sum();
                let scale = beta * dot;
                for (i, &vi) in v.iter().enumerate() {
                    let cur = a.get(k + i, j);
                    a.set(k + i, j, cur - scale * vi);
                }
            }
            let dot: T = v.iter().enumerate().map(|(i, &vi)| vi * qty[k + i]).sum();
            let scale = beta * dot;
            for (i, &vi) in v.iter().enumerate() {
                qty[k + i] -= scale * vi;
            }
        }
        a.set(k, k, alpha);
    }

    // Back substitution on the upper-triangular R block.
    let mut z = vec![T::zero(); cols];
    for k in (0..cols).rev() {
        let mut acc = qty[k];
        for (j, &zj) in z.iter().enumerate().skip(k + 1) {
            acc -= a.get(k, j) * zj;
        }
        z[k] = acc / a.get(k, k);
    }
    let mut coefficients = vec![T::zero(); cols];
    for (i, &p) in perm.iter().enumerate() {
        coefficients[p] = z[i];
    }

    let residual_sum_squares: T = qty[cols..].iter().map(|&e| e * e).sum();

    // Standard errors from sigma^2 (X'X)^-1 = sigma^2 P (R'R)^-1 P'.
    let mut std_errors = vec![T::zero(); cols];
    if rows > cols {
        let sigma2 = residual_sum_squares / T::from_f64_lossy((rows - cols) as f64);
        let rinv = invert_upper(&a, cols);
        for i in 0..cols {
            let diag: T = (i..cols).map(|m| rinv.get(i, m) * rinv.get(i, m)).sum();
            std_errors[perm[i]] = (sigma2 * diag).sqrt();
        }
    }

    Ok(LstsqFit {
        coefficients,
        std_errors,
        residual_sum_squares,
    })
}

fn column_norm<T: Scalar>(a: &Mat<T>, from_row: usize, col: usize) -> T {
    (from_row..a.rows())
        .map(|r| a.get(r, col) * a.get(r, col))
        .sum::<T>()
        .sqrt()
}

fn swap_columns<T: Scalar>(a: &mut Mat<T>, c1: usize, c2: usize) {
    for r in 0..a.rows() {
        let tmp = a.get(r, c1);
        a.set(r, c1, a.get(r, c2));
        a.set(r, c2, tmp);
    }
}

fn invert_upper<T: Scalar>(r: &Mat<T>, n: usize) -> Mat<T> {
    let mut inv = Mat::zeros(n, n);
    for col in 0..n {
        let mut e = vec![T::zero(); n];
        e[col] = T::one();
        for k in (0..=col).rev() {
            let mut acc = e[k];
            for j in k + 1..n {
                acc -= r.get(k, j) * inv.get(j, col);
            }
            inv.set(k, col, acc / r.get(k, k));
        }
    }
    inv
}
