//! Column-compressed sparse storage for the design matrix.

use crate::error::{Error, Result};

/// Sparse `n x d` matrix in compressed sparse column layout.
///
/// Row `i` is the feature vector of example `i`; column `j` is feature `j`.
/// Stored entries are never exactly zero, so the stored pattern is the numeric
/// sparsity pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseColMatrix {
    n_rows: usize,
    n_cols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseColMatrix {
    /// Builds a matrix from raw compressed-column arrays, checking every invariant.
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        col_ptr: Vec<usize>,
        row_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::InvalidMatrix(format!(
                "dimensions must be positive, got {n_rows}x{n_cols}"
            )));
        }
        if col_ptr.len() != n_cols + 1 {
            return Err(Error::LengthMismatch {
                expected: n_cols + 1,
                found: col_ptr.len(),
            });
        }
        if row_idx.len() != values.len() {
            return Err(Error::LengthMismatch {
                expected: row_idx.len(),
                found: values.len(),
            });
        }
        if col_ptr[0] != 0 || col_ptr[n_cols] != values.len() {
            return Err(Error::InvalidMatrix(
                "col_ptr must start at 0 and end at nnz".into(),
            ));
        }
        if let Some(j) = (0..n_cols).find(|&j| col_ptr[j] > col_ptr[j + 1]) {
            return Err(Error::InvalidMatrix(format!(
                "col_ptr decreases at column {j}"
            )));
        }
        for j in 0..n_cols {
            let (start, end) = (col_ptr[j], col_ptr[j + 1]);
            let mut prev: Option<usize> = None;
            for k in start..end {
                let i = row_idx[k];
                if i >= n_rows {
                    return Err(Error::OutOfBounds {
                        index: i,
                        dim: n_rows,
                    });
                }
                if prev.is_some_and(|p| p >= i) {
                    return Err(Error::InvalidMatrix(format!(
                        "row indices of column {j} are not strictly increasing"
                    )));
                }
                prev = Some(i);
                let v = values[k];
                if v == 0.0 {
                    return Err(Error::ExplicitZero { row: i, col: j });
                }
                if !v.is_finite() {
                    return Err(Error::NonFinite("matrix entry"));
                }
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            col_ptr,
            row_idx,
            values,
        })
    }

    /// Builds a matrix from per-row `(column, value)` lists with 0-based,
    /// strictly increasing column indices.
    pub fn from_rows(n_cols: usize, rows: &[Vec<(usize, f64)>]) -> Result<Self> {
        let n_rows = rows.len();
        let mut counts = vec![0usize; n_cols];
        for (i, row) in rows.iter().enumerate() {
            let mut prev: Option<usize> = None;
            for &(j, v) in row {
                if j >= n_cols {
                    return Err(Error::OutOfBounds {
                        index: j,
                        dim: n_cols,
                    });
                }
                if prev.is_some_and(|p| p >= j) {
                    return Err(Error::InvalidMatrix(format!(
                        "column indices of row {i} are not strictly increasing"
                    )));
                }
                if v == 0.0 {
                    return Err(Error::ExplicitZero { row: i, col: j });
                }
                prev = Some(j);
                counts[j] += 1;
            }
        }
        let mut col_ptr = Vec::with_capacity(n_cols + 1);
        col_ptr.push(0);
        for c in &counts {
            col_ptr.push(col_ptr.last().unwrap() + c);
        }
        let nnz = *col_ptr.last().unwrap();
        let mut next = col_ptr[..n_cols].to_vec();
        let mut row_idx = vec![0usize; nnz];
        let mut values = vec![0.0; nnz];
        for (i, row) in rows.iter().enumerate() {
            for &(j, v) in row {
                row_idx[next[j]] = i;
                values[next[j]] = v;
                next[j] += 1;
            }
        }
        Self::new(n_rows, n_cols, col_ptr, row_idx, values)
    }

    /// Builds a matrix from dense rows; zero entries are structural and not stored.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        let sparse: Vec<Vec<(usize, f64)>> = rows
            .iter()
            .map(|r| {
                r.iter()
                    .copied()
                    .enumerate()
                    .filter(|&(_, v)| v != 0.0)
                    .collect()
            })
            .collect();
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::InvalidMatrix("ragged dense rows".into()));
        }
        Self::from_rows(n_cols, &sparse)
    }

    pub fn identity(d: usize) -> Self {
        Self::new(d, d, (0..=d).collect(), (0..d).collect(), vec![1.0; d])
            .expect("identity is well formed")
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_indices(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Row indices and values of column `j`, in storage order.
    #[inline]
    pub fn column(&self, j: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.col_ptr[j], self.col_ptr[j + 1]);
        (&self.row_idx[s..e], &self.values[s..e])
    }

    #[inline]
    pub fn column_nnz(&self, j: usize) -> usize {
        self.col_ptr[j + 1] - self.col_ptr[j]
    }

    /// `sum_i X_ij * r_i`, accumulated in storage order.
    #[inline]
    pub fn column_dot(&self, j: usize, r: &[f64]) -> f64 {
        let (rows, vals) = self.column(j);
        let mut acc = 0.0;
        for (&i, &v) in rows.iter().zip(vals) {
            acc += v * r[i];
        }
        acc
    }

    /// `out += alpha * X[:, j]`.
    #[inline]
    pub fn axpy_column(&self, j: usize, alpha: f64, out: &mut [f64]) {
        let (rows, vals) = self.column(j);
        for (&i, &v) in rows.iter().zip(vals) {
            out[i] += alpha * v;
        }
    }

    pub fn column_sq_norm(&self, j: usize) -> f64 {
        self.column(j).1.iter().map(|v| v * v).sum()
    }

    /// `out = X v`, accumulating columns in ascending order.
    pub fn mul_vec_into(&self, v: &[f64], out: &mut [f64]) {
        assert_eq!(v.len(), self.n_cols);
        assert_eq!(out.len(), self.n_rows);
        out.fill(0.0);
        for (j, &vj) in v.iter().enumerate() {
            if vj != 0.0 {
                self.axpy_column(j, vj, out);
            }
        }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows];
        self.mul_vec_into(v, &mut out);
        out
    }

    /// `X^T r`, one storage-order dot product per column.
    pub fn t_mul_vec(&self, r: &[f64]) -> Vec<f64> {
        assert_eq!(r.len(), self.n_rows);
        (0..self.n_cols).map(|j| self.column_dot(j, r)).collect()
    }

    /// Number of stored entries in each row.
    pub fn row_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_rows];
        for &i in &self.row_idx {
            counts[i] += 1;
        }
        counts
    }

    /// `X * diag(factors)`. Factors must be nonzero and finite.
    pub fn scale_columns(&self, factors: &[f64]) -> Result<Self> {
        if factors.len() != self.n_cols {
            return Err(Error::LengthMismatch {
                expected: self.n_cols,
                found: factors.len(),
            });
        }
        let mut values = self.values.clone();
        for (j, &f) in factors.iter().enumerate() {
            for v in &mut values[self.col_ptr[j]..self.col_ptr[j + 1]] {
                *v *= f;
            }
        }
        Self::new(
            self.n_rows,
            self.n_cols,
            self.col_ptr.clone(),
            self.row_idx.clone(),
            values,
        )
    }

    /// Keeps only the listed columns, in the given order.
    pub fn select_columns(&self, keep: &[usize]) -> Result<Self> {
        let mut col_ptr = vec![0];
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        for &j in keep {
            if j >= self.n_cols {
                return Err(Error::OutOfBounds {
                    index: j,
                    dim: self.n_cols,
                });
            }
            let (r, v) = self.column(j);
            row_idx.extend_from_slice(r);
            values.extend_from_slice(v);
            col_ptr.push(values.len());
        }
        Self::new(self.n_rows, keep.len(), col_ptr, row_idx, values)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n_cols]; self.n_rows];
        for j in 0..self.n_cols {
            let (rows, vals) = self.column(j);
            for (&i, &v) in rows.iter().zip(vals) {
                out[i][j] = v;
            }
        }
        out
    }
}
