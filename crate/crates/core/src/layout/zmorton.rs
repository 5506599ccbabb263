//! Dense matrices stored as `l×l` blocks in Z-Morton order.

use crate::layout::morton::{block_address, block_coords};
use crate::matrix::Matrix;

/// Dense matrix stored block by block along the Z-order curve.
///
/// Both padded extents are `l` times a power of two; entries outside the
/// logical `rows × cols` region are zero. Each block is `l*l` values in
/// row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct ZMortonMatrix {
    rows: usize,
    cols: usize,
    l: usize,
    grid_rows: usize,
    grid_cols: usize,
    blocks: Vec<f64>,
}

fn grid_extent(n: usize, l: usize) -> usize {
    n.div_ceil(l).max(1).next_power_of_two()
}

impl ZMortonMatrix {
    pub fn zeros(rows: usize, cols: usize, l: usize) -> Self {
        assert!(l >= 1, "block side must be positive");
        let grid_rows = grid_extent(rows, l);
        let grid_cols = grid_extent(cols, l);
        Self {
            rows,
            cols,
            l,
            grid_rows,
            grid_cols,
            blocks: vec![0.0; grid_rows * grid_cols * l * l],
        }
    }

    pub fn from_dense(dense: &Matrix, l: usize) -> Self {
        let mut zm = Self::zeros(dense.rows(), dense.cols(), l);
        for i in 0..dense.rows() {
            for j in 0..dense.cols() {
                zm.set(i, j, dense.get(i, j));
            }
        }
        zm
    }

    /// Row-major copy of the logical region.
    pub fn to_dense(&self) -> Matrix {
        Matrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn padded_rows(&self) -> usize {
        self.grid_rows * self.l
    }

    pub fn padded_cols(&self) -> usize {
        self.grid_cols * self.l
    }

    /// Number of block rows.
    pub fn grid_rows(&self) -> usize {
        self.grid_rows
    }

    /// Number of block columns.
    pub fn grid_cols(&self) -> usize {
        self.grid_cols
    }

    pub fn block_count(&self) -> usize {
        self.grid_rows * self.grid_cols
    }

    pub fn address(&self, block_row: usize, block_col: usize) -> usize {
        block_address(block_row, block_col, self.grid_rows, self.grid_cols)
    }

    pub fn coords(&self, address: usize) -> (usize, usize) {
        block_coords(address, self.grid_rows, self.grid_cols)
    }

    /// Block stored at physical position `address`.
    pub fn block_at(&self, address: usize) -> &[f64] {
        let n = self.l * self.l;
        &self.blocks[address * n..(address + 1) * n]
    }

    pub fn block_at_mut(&mut self, address: usize) -> &mut [f64] {
        let n = self.l * self.l;
        &mut self.blocks[address * n..(address + 1) * n]
    }

    pub fn block(&self, block_row: usize, block_col: usize) -> &[f64] {
        self.block_at(self.address(block_row, block_col))
    }

    pub fn block_mut(&mut self, block_row: usize, block_col: usize) -> &mut [f64] {
        let a = self.address(block_row, block_col);
        self.block_at_mut(a)
    }

    /// Blocks in storage (Morton) order with their `(block_row, block_col)`.
    pub fn blocks(&self) -> impl Iterator<Item = ((usize, usize), &[f64])> + '_ {
        self.blocks
            .chunks_exact(self.l * self.l)
            .enumerate()
            .map(|(a, b)| (self.coords(a), b))
    }

    fn offset(&self, i: usize, j: usize) -> usize {
        let a = self.address(i / self.l, j / self.l);
        a * self.l * self.l + (i % self.l) * self.l + j % self.l
    }

    /// Entry at padded coordinates; padding reads as zero.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.blocks[self.offset(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let o = self.offset(i, j);
        self.blocks[o] = v;
    }

    /// Logical rows covered by block row `br` (0 for pure padding).
    pub fn valid_rows_in_block(&self, br: usize) -> usize {
        self.rows.saturating_sub(br * self.l).min(self.l)
    }

    pub fn valid_cols_in_block(&self, bc: usize) -> usize {
        self.cols.saturating_sub(bc * self.l).min(self.l)
    }

    pub fn raw(&self) -> &[f64] {
        &self.blocks
    }
}

/// Row-major dense matrix to Z-Morton blocks of side `l`.
pub fn to_zmorton(dense: &Matrix, l: usize) -> ZMortonMatrix {
    ZMortonMatrix::from_dense(dense, l)
}

/// Z-Morton blocks back to the row-major logical matrix.
pub fn from_zmorton(zm: &ZMortonMatrix) -> Matrix {
    zm.to_dense()
}
