use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::linalg::LuError;
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{MatMut, Par};

use super::{norm2, CsrMatrix};
use crate::error::{Error, Result};

/// Entries below this fraction of the largest magnitude in their row are
/// treated as zero; a column with no entry above it counts as empty.
const PIVOT_REL_TOL: f64 = 1e-14;
/// Target relative residual of a solve, measured on the row-scaled system.
const RESIDUAL_TOL: f64 = 1e-10;
const MAX_REFINEMENTS: usize = 3;

/// Sparse LU factorization with partial pivoting and a COLAMD column ordering.
///
/// Rows are equilibrated to unit maximum before factoring, so magnitudes are
/// judged relative to their own row. The factorization is sequential and
/// deterministic. Singularity is reported when a row or column is
/// numerically empty, when no pivot can be found in a column, or when a solve
/// yields non-finite values or cannot reach the target residual even after
/// iterative refinement.
pub struct LuFactor {
    matrix: CsrMatrix,
    row_scale: Vec<f64>,
    lu: Lu<usize, f64>,
}

impl std::fmt::Debug for LuFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LuFactor")
            .field("n", &self.matrix.n_rows())
            .field("nnz", &self.matrix.nnz())
            .finish()
    }
}

impl LuFactor {
    pub fn new(m: &CsrMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::NotSquare {
                n_rows: m.n_rows(),
                n_cols: m.n_cols(),
            });
        }
        let n = m.n_rows();
        let row_max = m.row_max_abs();
        if let Some(row) = row_max.iter().position(|&r| !(r > 0.0) || !r.is_finite()) {
            return Err(Error::Singular { row });
        }
        let row_scale: Vec<f64> = row_max.iter().map(|r| 1.0 / r).collect();

        // faer factors column-major storage: the CSR arrays of the transpose
        // are exactly the CSC arrays of `m`. Negligible entries are dropped so
        // that structural rank deficiency surfaces in the symbolic phase.
        let t = m.transpose();
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::with_capacity(t.nnz());
        let mut vals = Vec::with_capacity(t.nnz());
        col_ptr.push(0usize);
        for j in 0..n {
            let (rows, v) = t.row(j);
            for (&r, &x) in rows.iter().zip(v) {
                let x = x * row_scale[r];
                if x.abs() > PIVOT_REL_TOL {
                    row_idx.push(r);
                    vals.push(x);
                }
            }
            if row_idx.len() == col_ptr[j] {
                return Err(Error::Singular { row: j });
            }
            col_ptr.push(row_idx.len());
        }
        let symbolic = SymbolicSparseColMatRef::new_checked(n, n, &col_ptr, None, &row_idx);
        let csc = SparseColMatRef::new(symbolic, &vals);

        faer::set_global_parallelism(Par::Seq);
        let lu = csc.sp_lu().map_err(|e| match e {
            LuError::SymbolicSingular { index } => Error::Singular { row: index },
            LuError::Generic(g) => Error::Solver(format!("sparse LU failed: {g:?}")),
        })?;
        Ok(Self {
            matrix: m.clone(),
            row_scale,
            lu,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.n_rows()
    }

    /// Solves with an already row-scaled right-hand side.
    fn raw_solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        let n = x.len();
        self.lu
            .solve_in_place(MatMut::from_column_major_slice_mut(&mut x, n, 1));
        x
    }

    /// Solves `m x = b` with iterative refinement.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: b.len(),
            });
        }
        let sb: Vec<f64> = b.iter().zip(&self.row_scale).map(|(v, s)| v * s).collect();
        let b_norm = norm2(&sb);
        if b_norm == 0.0 {
            return Ok(vec![0.0; n]);
        }
        let mut x = self.raw_solve(&sb);
        let mut r = vec![0.0; n];
        for pass in 0..=MAX_REFINEMENTS {
            if let Some(row) = x.iter().position(|v| !v.is_finite()) {
                return Err(Error::Singular { row });
            }
            self.matrix.spmv_into(&x, &mut r);
            r.iter_mut()
                .zip(&sb)
                .zip(&self.row_scale)
                .for_each(|((ri, bi), s)| *ri = bi - *ri * s);
            if norm2(&r) <= RESIDUAL_TOL * b_norm {
                return Ok(x);
            }
            if pass == MAX_REFINEMENTS {
                break;
            }
            let dx = self.raw_solve(&r);
            x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
        }
        let row = r
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |(bi, bv), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) })
            .0;
        Err(Error::Singular { row })
    }
}

/// Factors `m` and solves `m x = b`.
pub fn solve_linear(m: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != m.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: m.n_rows(),
            found: b.len(),
        });
    }
    LuFactor::new(m)?.solve(b)
}
