//! Compressed-sparse-row matrices, block assembly, and direct solves.

mod block;
mod lu;
pub mod market;

pub use block::{assemble_block, BlockSpec};
pub use lu::{solve_linear, LuFactor};

use crate::error::{Error, Result};

/// A single `(row, col, value)` entry used to build a [`CsrMatrix`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Triplet {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

impl Triplet {
    pub fn new(row: usize, col: usize, value: f64) -> Self {
        Self { row, col, value }
    }
}

/// Real sparse matrix in compressed-sparse-row layout.
///
/// Column indices are strictly increasing inside each row and no `(row, col)`
/// pair is stored twice. Explicit zeros are allowed.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from unordered triplets, summing duplicates.
    pub fn from_triplets(n_rows: usize, n_cols: usize, entries: &[Triplet]) -> Result<Self> {
        let mut counts = vec![0usize; n_rows + 1];
        for t in entries {
            if t.row >= n_rows || t.col >= n_cols {
                return Err(Error::IndexOutOfRange {
                    row: t.row,
                    col: t.col,
                    n_rows,
                    n_cols,
                });
            }
            counts[t.row + 1] += 1;
        }
        for i in 0..n_rows {
            counts[i + 1] += counts[i];
        }

        // bucket by row, then sort and merge each row
        let mut next = counts.clone();
        let mut cols = vec![0usize; entries.len()];
        let mut vals = vec![0.0; entries.len()];
        for t in entries {
            let k = next[t.row];
            cols[k] = t.col;
            vals[k] = t.value;
            next[t.row] += 1;
        }

        let mut row_offsets = Vec::with_capacity(n_rows + 1);
        let mut col_indices = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        row_offsets.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for i in 0..n_rows {
            scratch.clear();
            scratch.extend((counts[i]..counts[i + 1]).map(|k| (cols[k], vals[k])));
            // stable sort keeps the summation order of duplicates deterministic
            scratch.sort_by_key(|&(c, _)| c);
            let mut iter = scratch.iter().copied();
            if let Some((mut cur_col, mut cur_val)) = iter.next() {
                for (c, v) in iter {
                    if c == cur_col {
                        cur_val += v;
                    } else {
                        col_indices.push(cur_col);
                        values.push(cur_val);
                        cur_col = c;
                        cur_val = v;
                    }
                }
                col_indices.push(cur_col);
                values.push(cur_val);
            }
            row_offsets.push(col_indices.len());
        }

        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Wraps raw CSR arrays after checking every structural invariant.
    pub fn from_raw_parts(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let bad = |msg: &str| Err(Error::InvalidStructure(msg.to_string()));
        if row_offsets.len() != n_rows + 1 {
            return bad("row_offsets must have n_rows + 1 entries");
        }
        if row_offsets[0] != 0 || *row_offsets.last().unwrap() != values.len() {
            return bad("row_offsets must start at 0 and end at nnz");
        }
        if col_indices.len() != values.len() {
            return bad("col_indices and values differ in length");
        }
        for i in 0..n_rows {
            let (s, e) = (row_offsets[i], row_offsets[i + 1]);
            if s > e {
                return bad("row_offsets must be non-decreasing");
            }
            let row = &col_indices[s..e];
            if row.iter().any(|&c| c >= n_cols) {
                return bad("column index out of range");
            }
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return bad("column indices must be strictly increasing within a row");
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            row_offsets: vec![0; n_rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    /// Square diagonal matrix; every diagonal entry is stored, zeros included.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[s..e], &self.values[s..e])
    }

    /// Stored value at `(i, j)`, zero when absent.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn to_triplets(&self) -> Vec<Triplet> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            out.extend(cols.iter().zip(vals).map(|(&c, &v)| Triplet::new(i, c, v)));
        }
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n_cols]; self.n_rows];
        for t in self.to_triplets() {
            out[t.row][t.col] = t.value;
        }
        out
    }

    /// Sparse matrix-vector product `self * x`.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_cols {
            return Err(Error::DimensionMismatch {
                expected: self.n_cols,
                found: x.len(),
            });
        }
        let mut y = vec![0.0; self.n_rows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    /// Unchecked product into a preallocated buffer. Panics on bad lengths.
    pub(crate) fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols);
        assert_eq!(y.len(), self.n_rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (s, e) = (self.row_offsets[i], self.row_offsets[i + 1]);
            *yi = self.col_indices[s..e]
                .iter()
                .zip(&self.values[s..e])
                .map(|(&c, &v)| v * x[c])
                .sum();
        }
    }

    /// `xᵀ self y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let my = self.spmv(y)?;
        if x.len() != my.len() {
            return Err(Error::DimensionMismatch {
                expected: my.len(),
                found: x.len(),
            });
        }
        Ok(dot(x, &my))
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for j in 0..self.n_cols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut col_indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                col_indices[next[c]] = i;
                values[next[c]] = v;
                next[c] += 1;
            }
        }
        Self {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_offsets: counts,
            col_indices,
            values,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }

    /// `self * diag(d)`, scaling column `j` by `d[j]`.
    pub fn scale_columns(&self, d: &[f64]) -> Result<Self> {
        if d.len() != self.n_cols {
            return Err(Error::DimensionMismatch {
                expected: self.n_cols,
                found: d.len(),
            });
        }
        let mut out = self.clone();
        for (v, &c) in out.values.iter_mut().zip(&self.col_indices) {
            *v *= d[c];
        }
        Ok(out)
    }

    /// Sum of two matrices with identical shape.
    pub fn add(&self, other: &CsrMatrix) -> Result<Self> {
        if self.n_rows != other.n_rows || self.n_cols != other.n_cols {
            return Err(Error::DimensionMismatch {
                expected: self.n_rows * self.n_cols,
                found: other.n_rows * other.n_cols,
            });
        }
        let mut t = self.to_triplets();
        t.extend(other.to_triplets());
        Self::from_triplets(self.n_rows, self.n_cols, &t)
    }

    /// Replaces every listed row by the unit row `e_{col_of(row)}`.
    ///
    /// `rows` maps row index to the column receiving the 1.
    pub fn with_unit_rows(&self, rows: &[(usize, usize)]) -> Result<Self> {
        let mut target = vec![None; self.n_rows];
        for &(r, c) in rows {
            if r >= self.n_rows || c >= self.n_cols {
                return Err(Error::IndexOutOfRange {
                    row: r,
                    col: c,
                    n_rows: self.n_rows,
                    n_cols: self.n_cols,
                });
            }
            target[r] = Some(c);
        }
        let mut row_offsets = Vec::with_capacity(self.n_rows + 1);
        let mut col_indices = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        row_offsets.push(0);
        for (i, t) in target.iter().enumerate() {
            match t {
                Some(c) => {
                    col_indices.push(*c);
                    values.push(1.0);
                }
                None => {
                    let (cols, vals) = self.row(i);
                    col_indices.extend_from_slice(cols);
                    values.extend_from_slice(vals);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Ok(Self {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Largest absolute value in each row.
    pub fn row_max_abs(&self) -> Vec<f64> {
        (0..self.n_rows)
            .map(|i| self.row(i).1.iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .collect()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let t = self.transpose();
        self.to_triplets()
            .iter()
            .all(|e| (t.get(e.row, e.col) - e.value).abs() <= tol)
            && t
                .to_triplets()
                .iter()
                .all(|e| (self.get(e.row, e.col) - e.value).abs() <= tol)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
