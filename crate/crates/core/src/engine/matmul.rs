//! Recursive divide-and-conquer matmul over Z-Morton blocks.
//!
//! The output grid is split into up to four quadrants, one per systolic
//! array. Each quadrant is computed depth-first: square subproblems are cut
//! into 2×2×2 as in the classic recursive scheme, rectangular ones halve
//! their longest extent first. Interleaving the quadrants' statements gives
//! the unrolled block access order used by the accelerator.

use std::fmt;

use crate::bcoo::{iter_nonzero_blocks, BcooMatrix};
use crate::counters::OpCounts;
use crate::error::{Error, Result};
use crate::layout::ZMortonMatrix;

/// Read access to a blocked operand; absent blocks are all-zero.
pub trait BlockOperand: Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn l(&self) -> usize;
    /// `(grid_rows, grid_cols)` of the padded block grid.
    fn grid(&self) -> (usize, usize);
    fn block(&self, br: usize, bc: usize) -> Option<&[f64]>;
}

impl BlockOperand for ZMortonMatrix {
    fn rows(&self) -> usize {
        ZMortonMatrix::rows(self)
    }

    fn cols(&self) -> usize {
        ZMortonMatrix::cols(self)
    }

    fn l(&self) -> usize {
        ZMortonMatrix::l(self)
    }

    fn grid(&self) -> (usize, usize) {
        (self.grid_rows(), self.grid_cols())
    }

    fn block(&self, br: usize, bc: usize) -> Option<&[f64]> {
        Some(ZMortonMatrix::block(self, br, bc))
    }
}

/// A BCOO matrix with its stored blocks expanded for random access.
#[derive(Debug, Clone)]
pub struct BlockSparse {
    shape: ZMortonMatrix,
    slots: Vec<Option<usize>>,
    data: Vec<f64>,
}

impl BlockSparse {
    pub fn from_bcoo(b: &BcooMatrix) -> Result<Self> {
        b.validate()?;
        let shape = ZMortonMatrix::zeros(b.rows, b.cols, b.l);
        let mut slots = vec![None; shape.block_count()];
        let mut data = Vec::with_capacity(b.stored_blocks() * b.l * b.l);
        for (t, (address, block)) in iter_nonzero_blocks(b).enumerate() {
            slots[address] = Some(t);
            data.extend_from_slice(&block);
        }
        Ok(Self { shape, slots, data })
    }

    pub fn stored_blocks(&self) -> usize {
        self.slots.iter().flatten().count()
    }

    pub fn is_present(&self, address: usize) -> bool {
        self.slots[address].is_some()
    }
}

impl BlockOperand for BlockSparse {
    fn rows(&self) -> usize {
        self.shape.rows()
    }

    fn cols(&self) -> usize {
        self.shape.cols()
    }

    fn l(&self) -> usize {
        self.shape.l()
    }

    fn grid(&self) -> (usize, usize) {
        (self.shape.grid_rows(), self.shape.grid_cols())
    }

    fn block(&self, br: usize, bc: usize) -> Option<&[f64]> {
        let n = self.shape.l() * self.shape.l();
        self.slots[self.shape.address(br, bc)].map(|t| &self.data[t * n..(t + 1) * n])
    }
}

/// One block product `C[c] += A[a] · B[b]`, in block coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockOp {
    pub c: (usize, usize),
    pub a: (usize, usize),
    pub b: (usize, usize),
}

/// Operations for one output quadrant, grouped into statements: maximal
/// runs of consecutive products accumulating into the same output block.
#[derive(Debug, Clone, PartialEq)]
pub struct Part {
    pub ops: Vec<BlockOp>,
}

impl Part {
    pub fn statements(&self) -> Vec<&[BlockOp]> {
        self.ops.chunk_by(|x, y| x.c == y.c).collect()
    }
}

/// The unrolled schedule of a blocked product with `mb × kb` by `kb × nb`
/// block grids (all powers of two).
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub mb: usize,
    pub kb: usize,
    pub nb: usize,
    pub parts: Vec<Part>,
}

#[derive(Clone, Copy)]
struct Range {
    start: usize,
    len: usize,
}

impl Range {
    fn halves(self) -> [Range; 2] {
        let h = self.len / 2;
        [
            Range {
                start: self.start,
                len: h,
            },
            Range {
                start: self.start + h,
                len: h,
            },
        ]
    }
}

fn recurse(rows: Range, inner: Range, cols: Range, out: &mut Vec<BlockOp>) {
    let (m, k, n) = (rows.len, inner.len, cols.len);
    if m == 1 && k == 1 && n == 1 {
        out.push(BlockOp {
            c: (rows.start, cols.start),
            a: (rows.start, inner.start),
            b: (inner.start, cols.start),
        });
        return;
    }
    if m == k && k == n {
        let (rh, kh, ch) = (rows.halves(), inner.halves(), cols.halves());
        for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            for kk in kh {
                recurse(rh[i], kk, ch[j], out);
            }
        }
        return;
    }
    let largest = m.max(k).max(n);
    if m == largest {
        for r in rows.halves() {
            recurse(r, inner, cols, out);
        }
    } else if n == largest {
        for c in cols.halves() {
            recurse(rows, inner, c, out);
        }
    } else {
        for kk in inner.halves() {
            recurse(rows, kk, cols, out);
        }
    }
}

/// Builds the schedule; quadrants are listed NW, NE, SW, SE.
pub fn schedule(mb: usize, kb: usize, nb: usize) -> Schedule {
    debug_assert!(mb.is_power_of_two() && kb.is_power_of_two() && nb.is_power_of_two());
    let full = |len| Range { start: 0, len };
    let row_parts = if mb >= 2 {
        full(mb).halves().to_vec()
    } else {
        vec![full(mb)]
    };
    let col_parts = if nb >= 2 {
        full(nb).halves().to_vec()
    } else {
        vec![full(nb)]
    };
    let mut parts = Vec::new();
    for r in &row_parts {
        for c in &col_parts {
            let mut ops = Vec::with_capacity(r.len * c.len * kb);
            recurse(*r, full(kb), *c, &mut ops);
            parts.push(Part { ops });
        }
    }
    Schedule { mb, kb, nb, parts }
}

impl Schedule {
    /// Statements interleaved round-robin across quadrants.
    pub fn statement_trace(&self) -> Vec<Vec<BlockOp>> {
        let per_part: Vec<Vec<&[BlockOp]>> = self.parts.iter().map(Part::statements).collect();
        let longest = per_part.iter().map(Vec::len).max().unwrap_or(0);
        let mut out = Vec::new();
        for s in 0..longest {
            for p in &per_part {
                if let Some(stmt) = p.get(s) {
                    out.push(stmt.to_vec());
                }
            }
        }
        out
    }

    /// Lockstep steps: entry `t` holds the `t`-th operation of each quadrant.
    pub fn steps(&self) -> Vec<Vec<BlockOp>> {
        let longest = self.parts.iter().map(|p| p.ops.len()).max().unwrap_or(0);
        (0..longest)
            .map(|t| {
                self.parts
                    .iter()
                    .filter_map(|p| p.ops.get(t).copied())
                    .collect()
            })
            .collect()
    }

    pub fn ops(&self) -> impl Iterator<Item = &BlockOp> {
        self.parts.iter().flat_map(|p| p.ops.iter())
    }
}

/// A statement rendered with Morton block indices, e.g. `C_0 += A_0·B_0 + A_1·B_2`.
pub struct StatementDisplay<'a> {
    pub ops: &'a [BlockOp],
    pub grids: [(usize, usize); 3],
}

impl fmt::Display for StatementDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [ga, gb, gc] = self.grids;
        let addr = |(r, c): (usize, usize), (gr, gcn): (usize, usize)| {
            crate::layout::block_address(r, c, gr, gcn)
        };
        write!(f, "C_{} +=", addr(self.ops[0].c, gc))?;
        for (i, op) in self.ops.iter().enumerate() {
            let sep = if i == 0 { " " } else { " + " };
            write!(f, "{sep}A_{}·B_{}", addr(op.a, ga), addr(op.b, gb))?;
        }
        Ok(())
    }
}

fn check_operands(a: &impl BlockOperand, b: &impl BlockOperand) -> Result<()> {
    if a.cols() != b.rows() {
        return Err(Error::Shape(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    if a.l() != b.l() {
        return Err(Error::Shape(format!(
            "block sides differ ({} vs {})",
            a.l(),
            b.l()
        )));
    }
    Ok(())
}

/// `c += a · b` for row-major `l×l` blocks.
pub(crate) fn block_mul_add(c: &mut [f64], a: &[f64], b: &[f64], l: usize) {
    for i in 0..l {
        for k in 0..l {
            let aik = a[i * l + k];
            if aik == 0.0 {
                continue;
            }
            let brow = &b[k * l..(k + 1) * l];
            let crow = &mut c[i * l..(i + 1) * l];
            for (cj, bj) in crow.iter_mut().zip(brow) {
                *cj += aik * bj;
            }
        }
    }
}

fn valid(n: usize, block: usize, l: usize) -> u64 {
    n.saturating_sub(block * l).min(l) as u64
}

/// Executes one block product if both operands are present; returns
/// whether it ran and tallies logical multiplications.
pub(crate) fn execute_op(
    op: &BlockOp,
    a: &impl BlockOperand,
    b: &impl BlockOperand,
    c: &mut ZMortonMatrix,
    counts: &mut OpCounts,
) -> bool {
    let (Some(ab), Some(bb)) = (a.block(op.a.0, op.a.1), b.block(op.b.0, op.b.1)) else {
        return false;
    };
    let l = a.l();
    block_mul_add(c.block_mut(op.c.0, op.c.1), ab, bb, l);
    counts.mults +=
        valid(a.rows(), op.a.0, l) * valid(a.cols(), op.a.1, l) * valid(b.cols(), op.b.1, l);
    true
}

/// Generic blocked product in schedule order; absent blocks are skipped.
///
/// Counts logical multiplications per executed block product and the
/// additions needed to sum them: one fewer than the terms reaching each
/// touched output element.
pub fn block_matmul(
    a: &impl BlockOperand,
    b: &impl BlockOperand,
    counts: &mut OpCounts,
) -> Result<ZMortonMatrix> {
    check_operands(a, b)?;
    let l = a.l();
    let (mb, kb) = a.grid();
    let nb = b.grid().1;
    let mut c = ZMortonMatrix::zeros(a.rows(), b.cols(), l);
    let mut touched = vec![false; c.block_count()];
    let mut local = OpCounts::default();
    for op in schedule(mb, kb, nb).ops() {
        if execute_op(op, a, b, &mut c, &mut local) {
            touched[c.address(op.c.0, op.c.1)] = true;
        }
    }
    let outputs: u64 = touched
        .iter()
        .enumerate()
        .filter(|(_, t)| **t)
        .map(|(addr, _)| {
            let (br, bc) = c.coords(addr);
            valid(a.rows(), br, l) * valid(b.cols(), bc, l)
        })
        .sum();
    counts.mults += local.mults;
    counts.adds += local.mults - outputs;
    Ok(c)
}

/// Dense recursive product of two Z-Morton matrices.
pub fn recursive_matmul(a: &ZMortonMatrix, b: &ZMortonMatrix) -> Result<ZMortonMatrix> {
    block_matmul(a, b, &mut OpCounts::default())
}

pub fn recursive_matmul_counted(
    a: &ZMortonMatrix,
    b: &ZMortonMatrix,
    counts: &mut OpCounts,
) -> Result<ZMortonMatrix> {
    block_matmul(a, b, counts)
}

/// `U · V` with `U` in BCOO form; block products with an absent `U` block
/// are skipped.
pub fn block_matmul_sparse(u: &BcooMatrix, v: &ZMortonMatrix) -> Result<ZMortonMatrix> {
    block_matmul(&BlockSparse::from_bcoo(u)?, v, &mut OpCounts::default())
}

/// Statement trace of the product, rendered with Morton indices.
pub fn matmul_trace(a: &impl BlockOperand, b: &impl BlockOperand) -> Result<Vec<String>> {
    check_operands(a, b)?;
    let (mb, kb) = a.grid();
    let nb = b.grid().1;
    let grids = [a.grid(), b.grid(), (mb, nb)];
    Ok(schedule(mb, kb, nb)
        .statement_trace()
        .iter()
        .map(|ops| StatementDisplay { ops, grids }.to_string())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bcoo::bcoo_encode;
    use crate::matrix::Matrix;

    fn numbered(n: usize, seed: f64) -> Matrix {
        Matrix::from_fn(n, n, |i, j| ((i * 7 + j * 3) as f64 * seed).sin())
    }

    #[test]
    fn identity_times_matrix() {
        let m = numbered(4, 0.3);
        let i = ZMortonMatrix::from_dense(&Matrix::identity(4), 4);
        let c = recursive_matmul(&i, &ZMortonMatrix::from_dense(&m, 4)).unwrap();
        assert_eq!(c.to_dense(), m);
    }

    #[test]
    fn eight_by_eight_matches_direct() {
        let (a, b) = (numbered(8, 0.37), numbered(8, 0.91));
        let c = recursive_matmul(
            &ZMortonMatrix::from_dense(&a, 4),
            &ZMortonMatrix::from_dense(&b, 4),
        )
        .unwrap();
        let want = a.matmul(&b).unwrap();
        assert!(c.to_dense().max_abs_diff(&want) <= 1e-10 * want.max_abs());
    }

    #[test]
    fn trace_on_two_by_two_grid() {
        let z = ZMortonMatrix::zeros(8, 8, 4);
        let t = matmul_trace(&z, &z).unwrap();
        assert_eq!(t[0], "C_0 += A_0·B_0 + A_1·B_2");
        assert_eq!(t[1], "C_1 += A_0·B_1 + A_1·B_3");
        assert_eq!(t.len(), 4);
    }

    #[test]
    fn trace_on_four_by_four_grid() {
        let z = ZMortonMatrix::zeros(16, 16, 4);
        let t = matmul_trace(&z, &z).unwrap();
        assert_eq!(
            &t[..4],
            [
                "C_0 += A_0·B_0 + A_1·B_2",
                "C_4 += A_0·B_4 + A_1·B_6",
                "C_8 += A_8·B_0 + A_9·B_2",
                "C_12 += A_8·B_4 + A_9·B_6",
            ]
        );
        assert!(t.contains(&"C_0 += A_4·B_8 + A_5·B_10".to_string()));
    }

    #[test]
    fn dense_steps_share_operands() {
        let s = schedule(4, 4, 4);
        let steps = s.steps();
        assert_eq!(steps.len(), 16);
        for step in &steps {
            let a: std::collections::HashSet<_> = step.iter().map(|o| o.a).collect();
            let b: std::collections::HashSet<_> = step.iter().map(|o| o.b).collect();
            assert_eq!((a.len(), b.len()), (2, 2));
        }
    }

    #[test]
    fn sparse_with_single_right_block() {
        // Only B_2 survives on a 4x4 block grid: C_0 = A_1·B_2 and C_8 = A_9·B_2.
        let a = ZMortonMatrix::from_dense(&numbered(16, 0.17), 4);
        let mut bz = ZMortonMatrix::zeros(16, 16, 4);
        bz.block_at_mut(2)
            .copy_from_slice(&numbered(4, 0.5).into_vec());
        let bs = BlockSparse::from_bcoo(&bcoo_encode(&bz)).unwrap();
        let mut counts = OpCounts::default();
        let c = block_matmul(&a, &bs, &mut counts).unwrap();
        // B_2 is block (1, 0): it meets A column block 1 for every row block.
        assert_eq!(counts.mults, 4 * 64);
        let mut want0 = vec![0.0; 16];
        block_mul_add(&mut want0, a.block_at(1), bz.block_at(2), 4);
        assert_eq!(c.block_at(0), want0.as_slice());
        let mut want8 = vec![0.0; 16];
        block_mul_add(&mut want8, a.block_at(9), bz.block_at(2), 4);
        assert_eq!(c.block_at(8), want8.as_slice());
        assert!(c.block_at(1).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sparse_edge_cases() {
        let v = ZMortonMatrix::from_dense(&numbered(8, 0.4), 4);
        let empty = bcoo_encode(&ZMortonMatrix::zeros(8, 8, 4));
        assert_eq!(
            block_matmul_sparse(&empty, &v).unwrap(),
            ZMortonMatrix::zeros(8, 8, 4)
        );
        let u = ZMortonMatrix::from_dense(&numbered(8, 0.8), 4);
        assert_eq!(
            block_matmul_sparse(&bcoo_encode(&u), &v).unwrap(),
            recursive_matmul(&u, &v).unwrap()
        );
    }

    #[test]
    fn dense_counts_are_logical() {
        // K=3, C=5, P=6 on l=4 padding.
        let u = ZMortonMatrix::from_dense(&Matrix::from_fn(3, 5, |i, j| (i + j) as f64), 4);
        let v = ZMortonMatrix::from_dense(&Matrix::from_fn(5, 6, |i, j| (i * j) as f64), 4);
        let mut counts = OpCounts::default();
        recursive_matmul_counted(&u, &v, &mut counts).unwrap();
        assert_eq!(counts, OpCounts::new(3 * 5 * 6, 3 * 4 * 6));
    }

    #[test]
    fn mismatched_shapes_fail() {
        let a = ZMortonMatrix::zeros(4, 8, 4);
        let b = ZMortonMatrix::zeros(4, 4, 4);
        assert!(recursive_matmul(&a, &b).is_err());
    }
}
