use super::{CsrMatrix, Triplet};
use crate::error::{Error, Result};

/// A grid of optional scaled blocks, concatenated by [`assemble_block`].
///
/// Block sizes are inferred from the blocks present; a block row or column
/// with no block at all needs its size set explicitly.
#[derive(Clone, Debug)]
pub struct BlockSpec<'a> {
    n_block_rows: usize,
    n_block_cols: usize,
    blocks: Vec<Option<(&'a CsrMatrix, f64)>>,
    row_sizes: Vec<Option<usize>>,
    col_sizes: Vec<Option<usize>>,
}

impl<'a> BlockSpec<'a> {
    pub fn new(n_block_rows: usize, n_block_cols: usize) -> Self {
        Self {
            n_block_rows,
            n_block_cols,
            blocks: vec![None; n_block_rows * n_block_cols],
            row_sizes: vec![None; n_block_rows],
            col_sizes: vec![None; n_block_cols],
        }
    }

    /// The usual 3x3 layout.
    pub fn three_by_three() -> Self {
        Self::new(3, 3)
    }

    pub fn set(mut self, i: usize, j: usize, block: &'a CsrMatrix, multiplier: f64) -> Self {
        assert!(i < self.n_block_rows && j < self.n_block_cols, "block ({i}, {j}) outside grid");
        self.blocks[i * self.n_block_cols + j] = Some((block, multiplier));
        self
    }

    pub fn row_size(mut self, i: usize, size: usize) -> Self {
        self.row_sizes[i] = Some(size);
        self
    }

    pub fn col_size(mut self, j: usize, size: usize) -> Self {
        self.col_sizes[j] = Some(size);
        self
    }

    fn block(&self, i: usize, j: usize) -> Option<(&'a CsrMatrix, f64)> {
        self.blocks[i * self.n_block_cols + j]
    }

    fn resolve_sizes(&self) -> Result<(Vec<usize>, Vec<usize>)> {
        let mut rows = self.row_sizes.clone();
        let mut cols = self.col_sizes.clone();
        for i in 0..self.n_block_rows {
            for j in 0..self.n_block_cols {
                let Some((b, _)) = self.block(i, j) else {
                    continue;
                };
                for (slot, size, what, idx) in [
                    (&mut rows[i], b.n_rows(), "block row", i),
                    (&mut cols[j], b.n_cols(), "block column", j),
                ] {
                    match slot {
                        Some(s) if *s != size => {
                            return Err(Error::BlockLayout(format!(
                                "{what} {idx} has blocks of size {s} and {size}"
                            )))
                        }
                        _ => *slot = Some(size),
                    }
                }
            }
        }
        let finish = |v: Vec<Option<usize>>, what: &str| -> Result<Vec<usize>> {
            v.into_iter()
                .enumerate()
                .map(|(k, s)| {
                    s.ok_or_else(|| Error::BlockLayout(format!("{what} {k} has undetermined size")))
                })
                .collect()
        };
        Ok((finish(rows, "block row")?, finish(cols, "block column")?))
    }
}

/// Concatenates the blocks of `spec`, each scaled by its multiplier.
pub fn assemble_block(spec: &BlockSpec<'_>) -> Result<CsrMatrix> {
    let (row_sizes, col_sizes) = spec.resolve_sizes()?;
    let offsets = |sizes: &[usize]| -> Vec<usize> {
        std::iter::once(0)
            .chain(sizes.iter().scan(0, |acc, s| {
                *acc += s;
                Some(*acc)
            }))
            .collect()
    };
    let row_off = offsets(&row_sizes);
    let col_off = offsets(&col_sizes);

    let nnz: usize = spec.blocks.iter().flatten().map(|(b, _)| b.nnz()).sum();
    let mut triplets = Vec::with_capacity(nnz);
    for i in 0..spec.n_block_rows {
        for j in 0..spec.n_block_cols {
            if let Some((b, mult)) = spec.block(i, j) {
                triplets.extend(
                    b.to_triplets()
                        .into_iter()
                        .map(|t| Triplet::new(t.row + row_off[i], t.col + col_off[j], mult * t.value)),
                );
            }
        }
    }
    CsrMatrix::from_triplets(row_off[spec.n_block_rows], col_off[spec.n_block_cols], &triplets)
}
