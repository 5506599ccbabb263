//! Block-based compressed coordinates (BCOO) for pruned Winograd weights.
//!
//! Only `l×l` blocks holding at least one nonzero are stored. For block `t`
//! (Morton address `bn[t]`), its nonzeros occupy `bi[t]..bi[t + 1]` of the
//! per-nonzero vectors `ai` (row in block), `aj` (column in block) and `an`
//! (value). Within a block the nonzeros are listed in row-major order.
//!
//! # Binary container
//!
//! All fields little-endian, 8 bytes each:
//!
//! ```text
//! rows, cols, l, n_blocks, nnz          (u64 × 5)
//! bn[n_blocks]                          (u64)
//! bi[n_blocks + 1]                      (u64)
//! ai[nnz], aj[nnz]                      (u64)
//! an[nnz]                               (f64, IEEE 754)
//! ```
//!
//! A batch file is a `u64` matrix count followed by that many containers.

use std::io::{Read, Write};

use thiserror::Error;

use crate::error::{Error, Result};
use crate::layout::{TransformedBatch, ZMortonMatrix};

#[derive(Error, Debug, PartialEq)]
pub enum BcooError {
    #[error("BI has {got} entries, expected {expected}")]
    BiLength { got: usize, expected: usize },

    #[error("BI must start at 0 and end at nnz ({nnz}); got first {first}, last {last}")]
    BiBounds {
        first: usize,
        last: usize,
        nnz: usize,
    },

    #[error("BI decreases at block {block}")]
    BiDecreasing { block: usize },

    #[error("block {block} is listed but holds no nonzeros")]
    EmptyBlock { block: usize },

    #[error("AI/AJ/AN lengths differ ({ai}/{aj}/{an})")]
    RaggedEntries { ai: usize, aj: usize, an: usize },

    #[error("BN is not strictly ascending at position {position}")]
    UnsortedBlocks { position: usize },

    #[error("block address {address} outside a grid of {blocks} blocks")]
    BlockOutOfRange { address: usize, blocks: usize },

    #[error("in-block coordinate ({row}, {col}) outside a {l}x{l} block")]
    CoordOutOfRange { row: usize, col: usize, l: usize },

    #[error("duplicate entry ({row}, {col}) in block {block}")]
    DuplicateEntry {
        block: usize,
        row: usize,
        col: usize,
    },

    #[error("explicit zero stored at entry {index}")]
    StoredZero { index: usize },
}

/// A block-sparse matrix in BCOO form.
#[derive(Debug, Clone, PartialEq)]
pub struct BcooMatrix {
    pub rows: usize,
    pub cols: usize,
    pub l: usize,
    pub bn: Vec<usize>,
    pub bi: Vec<usize>,
    pub ai: Vec<usize>,
    pub aj: Vec<usize>,
    pub an: Vec<f64>,
}

impl BcooMatrix {
    pub fn nnz(&self) -> usize {
        self.an.len()
    }

    pub fn stored_blocks(&self) -> usize {
        self.bn.len()
    }

    /// Shape of the padded block grid implied by `rows`, `cols`, `l`.
    pub fn grid(&self) -> (usize, usize) {
        let z = ZMortonMatrix::zeros(self.rows, self.cols, self.l);
        (z.grid_rows(), z.grid_cols())
    }

    /// Number of nonzeros in stored block `t`.
    pub fn block_nnz(&self, t: usize) -> usize {
        self.bi[t + 1] - self.bi[t]
    }

    /// Checks every structural invariant of the format.
    pub fn validate(&self) -> Result<(), BcooError> {
        let nb = self.bn.len();
        if self.bi.len() != nb + 1 {
            return Err(BcooError::BiLength {
                got: self.bi.len(),
                expected: nb + 1,
            });
        }
        let nnz = self.an.len();
        if self.ai.len() != nnz || self.aj.len() != nnz {
            return Err(BcooError::RaggedEntries {
                ai: self.ai.len(),
                aj: self.aj.len(),
                an: nnz,
            });
        }
        let (first, last) = (self.bi[0], self.bi[nb]);
        if first != 0 || last != nnz {
            return Err(BcooError::BiBounds { first, last, nnz });
        }
        let (gr, gc) = self.grid();
        for t in 0..nb {
            if self.bi[t + 1] < self.bi[t] {
                return Err(BcooError::BiDecreasing { block: t });
            }
            if self.bi[t + 1] == self.bi[t] {
                return Err(BcooError::EmptyBlock { block: self.bn[t] });
            }
            if t > 0 && self.bn[t] <= self.bn[t - 1] {
                return Err(BcooError::UnsortedBlocks { position: t });
            }
            if self.bn[t] >= gr * gc {
                return Err(BcooError::BlockOutOfRange {
                    address: self.bn[t],
                    blocks: gr * gc,
                });
            }
            let mut seen = vec![false; self.l * self.l];
            for e in self.bi[t]..self.bi[t + 1] {
                let (row, col) = (self.ai[e], self.aj[e]);
                if row >= self.l || col >= self.l {
                    return Err(BcooError::CoordOutOfRange {
                        row,
                        col,
                        l: self.l,
                    });
                }
                if std::mem::replace(&mut seen[row * self.l + col], true) {
                    return Err(BcooError::DuplicateEntry {
                        block: self.bn[t],
                        row,
                        col,
                    });
                }
                if self.an[e] == 0.0 {
                    return Err(BcooError::StoredZero { index: e });
                }
            }
        }
        Ok(())
    }

    /// Writes the binary container described in the module docs.
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        for v in [self.rows, self.cols, self.l, self.bn.len(), self.an.len()] {
            w.write_all(&(v as u64).to_le_bytes())?;
        }
        for v in self
            .bn
            .iter()
            .chain(&self.bi)
            .chain(&self.ai)
            .chain(&self.aj)
        {
            w.write_all(&(*v as u64).to_le_bytes())?;
        }
        for v in &self.an {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads and validates one container.
    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut header = [0usize; 5];
        for h in &mut header {
            *h = read_u64(r)?;
        }
        let [rows, cols, l, nb, nnz] = header;
        if l == 0 {
            return Err(Error::Container("block side is zero".into()));
        }
        let bn = read_u64s(r, nb)?;
        let bi = read_u64s(r, nb + 1)?;
        let ai = read_u64s(r, nnz)?;
        let aj = read_u64s(r, nnz)?;
        let an = (0..nnz)
            .map(|_| {
                let mut b = [0u8; 8];
                r.read_exact(&mut b)?;
                Ok(f64::from_le_bytes(b))
            })
            .collect::<Result<Vec<_>>>()?;
        let m = BcooMatrix {
            rows,
            cols,
            l,
            bn,
            bi,
            ai,
            aj,
            an,
        };
        m.validate()?;
        Ok(m)
    }
}

pub(crate) fn read_u64(r: &mut impl Read) -> Result<usize> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    usize::try_from(u64::from_le_bytes(b))
        .map_err(|_| Error::Container("count does not fit in usize".into()))
}

fn read_u64s(r: &mut impl Read, n: usize) -> Result<Vec<usize>> {
    // Guard against absurd headers before allocating.
    if n > (1 << 40) {
        return Err(Error::Container(format!("implausible length {n}")));
    }
    (0..n).map(|_| read_u64(r)).collect()
}

/// Compresses every block holding a nonzero, in ascending Morton order.
pub fn bcoo_encode(zm: &ZMortonMatrix) -> BcooMatrix {
    let l = zm.l();
    let mut out = BcooMatrix {
        rows: zm.rows(),
        cols: zm.cols(),
        l,
        bn: Vec::new(),
        bi: vec![0],
        ai: Vec::new(),
        aj: Vec::new(),
        an: Vec::new(),
    };
    for address in 0..zm.block_count() {
        let block = zm.block_at(address);
        if block.iter().all(|v| *v == 0.0) {
            continue;
        }
        for (idx, v) in block.iter().enumerate() {
            if *v != 0.0 {
                out.ai.push(idx / l);
                out.aj.push(idx % l);
                out.an.push(*v);
            }
        }
        out.bn.push(address);
        out.bi.push(out.an.len());
    }
    out
}

/// Expands a BCOO matrix back into Z-Morton blocks.
pub fn bcoo_decode(b: &BcooMatrix) -> Result<ZMortonMatrix> {
    b.validate()?;
    let mut zm = ZMortonMatrix::zeros(b.rows, b.cols, b.l);
    for (address, block) in iter_nonzero_blocks(b) {
        zm.block_at_mut(address).copy_from_slice(&block);
    }
    Ok(zm)
}

/// Materializes stored blocks in ascending Morton order.
///
/// Assumes a structurally valid matrix; see [`BcooMatrix::validate`].
pub fn iter_nonzero_blocks(b: &BcooMatrix) -> impl Iterator<Item = (usize, Vec<f64>)> + '_ {
    (0..b.bn.len()).map(move |t| {
        let mut block = vec![0.0; b.l * b.l];
        for e in b.bi[t]..b.bi[t + 1] {
            block[b.ai[e] * b.l + b.aj[e]] = b.an[e];
        }
        (b.bn[t], block)
    })
}

/// Fraction of logical entries that are zero.
pub fn sparsity_of(zm: &ZMortonMatrix) -> f64 {
    let total = zm.rows() * zm.cols();
    if total == 0 {
        return 0.0;
    }
    let mut zeros = 0usize;
    for i in 0..zm.rows() {
        for j in 0..zm.cols() {
            if zm.get(i, j) == 0.0 {
                zeros += 1;
            }
        }
    }
    zeros as f64 / total as f64
}

fn prune_count(target: f64, total: usize) -> usize {
    // Tolerate representation error in products like 0.7 * 10.
    let want = (target * total as f64 - 1e-9).ceil().max(0.0) as usize;
    want.min(total)
}

fn check_fraction(target: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::Config(format!(
            "sparsity {target} is outside [0, 1]"
        )));
    }
    Ok(())
}

/// Magnitude pruning: in each position matrix, zeroes the smallest-magnitude
/// logical entries until at least `target` of them are zero.
///
/// Ties break by `(row, col)`. Surviving values are left untouched.
pub fn prune(batch: &TransformedBatch, target: f64) -> Result<TransformedBatch> {
    check_fraction(target)?;
    let mats = batch
        .matrices()
        .iter()
        .map(|zm| {
            let mut entries: Vec<(f64, usize, usize)> = (0..zm.rows())
                .flat_map(|i| (0..zm.cols()).map(move |j| (i, j)))
                .map(|(i, j)| (zm.get(i, j).abs(), i, j))
                .collect();
            entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            let mut out = zm.clone();
            for &(_, i, j) in &entries[..prune_count(target, entries.len())] {
                out.set(i, j, 0.0);
            }
            out
        })
        .collect();
    TransformedBatch::new(batch.l(), mats)
}

/// Block-granular magnitude pruning: drops whole `l×l` blocks with the
/// smallest Frobenius norm until at least `target` of the blocks that
/// overlap the logical region are empty.
pub fn prune_blocks(batch: &TransformedBatch, target: f64) -> Result<TransformedBatch> {
    check_fraction(target)?;
    let mats = batch
        .matrices()
        .iter()
        .map(|zm| {
            let l = zm.l();
            let logical: Vec<(f64, usize)> = (0..zm.block_count())
                .filter(|&a| {
                    let (br, bc) = zm.coords(a);
                    br * l < zm.rows() && bc * l < zm.cols()
                })
                .map(|a| (zm.block_at(a).iter().map(|v| v * v).sum::<f64>(), a))
                .collect();
            let mut order = logical.clone();
            order.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            let mut out = zm.clone();
            for &(_, a) in &order[..prune_count(target, order.len())] {
                out.block_at_mut(a).fill(0.0);
            }
            out
        })
        .collect();
    TransformedBatch::new(batch.l(), mats)
}

/// The `l²` compressed weight matrices of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseBatch {
    l: usize,
    mats: Vec<BcooMatrix>,
}

impl SparseBatch {
    pub fn encode(batch: &TransformedBatch) -> Self {
        Self {
            l: batch.l(),
            mats: batch.matrices().iter().map(bcoo_encode).collect(),
        }
    }

    pub fn new(l: usize, mats: Vec<BcooMatrix>) -> Result<Self> {
        if mats.len() != l * l {
            return Err(Error::Shape(format!(
                "{} compressed matrices for tile side {l}",
                mats.len()
            )));
        }
        let (r, c) = (mats[0].rows, mats[0].cols);
        for m in &mats {
            if (m.rows, m.cols, m.l) != (r, c, mats[0].l) {
                return Err(Error::Shape("compressed matrices differ in shape".into()));
            }
            m.validate()?;
        }
        Ok(Self { l, mats })
    }

    pub fn decode(&self) -> Result<TransformedBatch> {
        let mats = self
            .mats
            .iter()
            .map(bcoo_decode)
            .collect::<Result<Vec<_>>>()?;
        TransformedBatch::new(self.l, mats)
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn rows(&self) -> usize {
        self.mats[0].rows
    }

    pub fn cols(&self) -> usize {
        self.mats[0].cols
    }

    pub fn matrices(&self) -> &[BcooMatrix] {
        &self.mats
    }

    pub fn nnz(&self) -> usize {
        self.mats.iter().map(BcooMatrix::nnz).sum()
    }

    pub fn stored_blocks(&self) -> usize {
        self.mats.iter().map(BcooMatrix::stored_blocks).sum()
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(&(self.mats.len() as u64).to_le_bytes())?;
        for m in &self.mats {
            m.write_to(w)?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let n = read_u64(r)?;
        let l = (n as f64).sqrt().round() as usize;
        if l * l != n || l == 0 {
            return Err(Error::Container(format!(
                "{n} matrices is not a square count"
            )));
        }
        let mats = (0..n)
            .map(|_| BcooMatrix::read_from(r))
            .collect::<Result<Vec<_>>>()?;
        Self::new(l, mats)
    }
}
