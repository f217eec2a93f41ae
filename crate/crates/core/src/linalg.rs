//! Small dense matrices and LU factorization with partial pivoting.
//!
//! The node systems in this crate are tiny (one row per arc), so a plain
//! row-major `Vec<f64>` is all that is needed.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Relative pivot threshold used by [`Lu::factor`].
pub const PIVOT_TOLERANCE: f64 = 1e-13;

#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from rows; all rows must share one length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for row in rows {
            if row.len() != n_cols {
                return Err(Error::DimensionMismatch {
                    context: "matrix row length",
                    expected: n_cols,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            n_rows,
            n_cols,
            data,
        })
    }

    pub fn from_fn(n_rows: usize, n_cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n_rows, n_cols);
        for i in 0..n_rows {
            for j in 0..n_cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n_cols, self.n_rows, |i, j| self[(j, i)])
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn max_abs_diagonal(&self) -> f64 {
        (0..self.n_rows.min(self.n_cols)).fold(0.0, |acc, i| acc.max(self[(i, i)].abs()))
    }

    /// Square submatrix keeping the listed rows and columns (in that order).
    pub fn principal_submatrix(&self, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), idx.len(), |a, b| self[(idx[a], idx[b])])
    }

    pub fn mul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.n_cols != other.n_rows {
            return Err(Error::DimensionMismatch {
                context: "matrix product",
                expected: self.n_cols,
                found: other.n_rows,
            });
        }
        let mut out = DenseMatrix::zeros(self.n_rows, other.n_cols);
        for i in 0..self.n_rows {
            for k in 0..self.n_cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.n_cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_cols {
            return Err(Error::DimensionMismatch {
                context: "matrix-vector product",
                expected: self.n_cols,
                found: x.len(),
            });
        }
        Ok((0..self.n_rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n_cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n_cols + j]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.n_rows, self.n_cols)?;
        for i in 0..self.n_rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// LU factorization `P A = L U` with partial (row) pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    /// L (unit lower, below the diagonal) and U packed together.
    packed: DenseMatrix,
    /// `perm[k]` is the original row sitting at position `k`.
    perm: Vec<usize>,
    swaps: usize,
    min_pivot: f64,
}

impl Lu {
    /// Factors `a`, failing with `SingularMatrix` when a pivot falls below
    /// `PIVOT_TOLERANCE` times the largest diagonal magnitude (or, for an
    /// all-zero diagonal, the largest entry).
    pub fn factor(a: &DenseMatrix) -> Result<Self> {
        let scale = match a.max_abs_diagonal() {
            s if s > 0.0 => s,
            _ => a.max_abs(),
        };
        Self::factor_with_threshold(a, PIVOT_TOLERANCE * scale)
    }

    pub fn factor_with_threshold(a: &DenseMatrix, threshold: f64) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                context: "LU factorization (square)",
                expected: a.n_rows(),
                found: a.n_cols(),
            });
        }
        let n = a.n_rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut swaps = 0;
        let mut min_pivot = f64::INFINITY;

        for k in 0..n {
            let (p, pivot_abs) = (k..n)
                .map(|r| (r, lu[(r, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot_abs == 0.0 || pivot_abs < threshold || !pivot_abs.is_finite() {
                return Err(Error::SingularMatrix {
                    pivot: pivot_abs,
                    threshold,
                });
            }
            min_pivot = min_pivot.min(pivot_abs);
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
                swaps += 1;
            }
            let pivot = lu[(k, k)];
            for r in (k + 1)..n {
                let factor = lu[(r, k)] / pivot;
                lu[(r, k)] = factor;
                if factor == 0.0 {
                    continue;
                }
                for j in (k + 1)..n {
                    lu[(r, j)] -= factor * lu[(k, j)];
                }
            }
        }
        Ok(Self {
            n,
            packed: lu,
            perm,
            swaps,
            min_pivot,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn determinant(&self) -> f64 {
        let sign = if self.swaps % 2 == 0 { 1.0 } else { -1.0 };
        (0..self.n).fold(sign, |acc, i| acc * self.packed[(i, i)])
    }

    /// Smallest pivot magnitude encountered.
    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                context: "LU solve right-hand side",
                expected: self.n,
                found: b.len(),
            });
        }
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..self.n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.packed[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..self.n).rev() {
            let mut s = x[i];
            for j in (i + 1)..self.n {
                s -= self.packed[(i, j)] * x[j];
            }
            x[i] = s / self.packed[(i, i)];
        }
        Ok(x)
    }

    pub fn inverse(&self) -> DenseMatrix {
        let mut inv = DenseMatrix::zeros(self.n, self.n);
        let mut e = vec![0.0; self.n];
        for j in 0..self.n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e).expect("dimension checked");
            for i in 0..self.n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

/// Solves a tridiagonal system in place with the Thomas algorithm.
///
/// `lower[i]` multiplies `x[i-1]` in row `i` (entry 0 unused) and
/// `upper[i]` multiplies `x[i+1]` (last entry unused). The caller is
/// responsible for diagonal dominance; no pivoting is performed.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    lower: Vec<f64>,
    /// Modified upper coefficients from the forward sweep.
    c_prime: Vec<f64>,
    /// Reciprocal of the modified diagonal.
    inv_denom: Vec<f64>,
}

impl Tridiagonal {
    pub fn factor(lower: &[f64], diag: &[f64], upper: &[f64]) -> Result<Self> {
        let n = diag.len();
        if lower.len() != n || upper.len() != n {
            return Err(Error::DimensionMismatch {
                context: "tridiagonal bands",
                expected: n,
                found: lower.len().min(upper.len()),
            });
        }
        let mut c_prime = vec![0.0; n];
        let mut inv_denom = vec![0.0; n];
        for i in 0..n {
            let prev = if i == 0 { 0.0 } else { lower[i] * c_prime[i - 1] };
            let denom = diag[i] - prev;
            if denom == 0.0 || !denom.is_finite() {
                return Err(Error::LinearSolveFailure(format!(
                    "zero pivot in tridiagonal row {i}"
                )));
            }
            inv_denom[i] = 1.0 / denom;
            c_prime[i] = upper[i] * inv_denom[i];
        }
        Ok(Self {
            lower: lower.to_vec(),
            c_prime,
            inv_denom,
        })
    }

    pub fn len(&self) -> usize {
        self.inv_denom.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inv_denom.is_empty()
    }

    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.len();
        debug_assert_eq!(rhs.len(), n);
        for i in 0..n {
            let prev = if i == 0 { 0.0 } else { self.lower[i] * rhs[i - 1] };
            rhs[i] = (rhs[i] - prev) * self.inv_denom[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            rhs[i] -= self.c_prime[i] * rhs[i + 1];
        }
    }
}
