//! Direct and Winograd convolution layers.
//!
//! All convolutions are correlations (no filter flip), indexed from 0:
//! `Y[k,i,j] = Σ_c Σ_p Σ_q G[k,c,p,q] · D[c, i·s+p−pad, j·s+q−pad]`.

use rayon::prelude::*;

use crate::bcoo::SparseBatch;
use crate::counters::OpCounts;
use crate::engine::matmul::{block_matmul, BlockSparse};
use crate::error::{Error, Result};
use crate::layout::{
    assemble_output, extract_tiles, gather_filters, scatter_to_matrices, FeatureMap, FilterBank,
    PlacedTile, TileGrid, TransformedBatch, ZMortonMatrix,
};
use crate::transform::{transform_input_tile_counted, WinogradPlan};

/// Operation tallies of one Winograd layer, all over logical (unpadded) data.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConvStats {
    /// Element-wise multiplications and the additions summing them over `C`.
    pub matmul: OpCounts,
    /// Additions and non-trivial multiplications of the input transforms.
    pub input_transform: OpCounts,
    pub inverse_transform: OpCounts,
    pub input_tiles: u64,
    pub output_tiles: u64,
}

fn check_conv(fm: &FeatureMap, filters: &FilterBank) -> Result<()> {
    if fm.channels() != filters.channels() {
        return Err(Error::Shape(format!(
            "input has {} channels, filters expect {}",
            fm.channels(),
            filters.channels()
        )));
    }
    Ok(())
}

/// Literal strided correlation over the zero-padded input.
pub fn direct_conv(
    fm: &FeatureMap,
    filters: &FilterBank,
    stride: usize,
    pad: usize,
) -> Result<FeatureMap> {
    check_conv(fm, filters)?;
    let r = filters.size();
    if stride == 0 {
        return Err(Error::Geometry("stride must be positive".into()));
    }
    let (hp, wp) = (fm.height() + 2 * pad, fm.width() + 2 * pad);
    if hp < r || wp < r {
        return Err(Error::Geometry(format!(
            "{}x{} input with pad {pad} yields no output for a {r}x{r} filter",
            fm.height(),
            fm.width()
        )));
    }
    let (oh, ow) = ((hp - r) / stride + 1, (wp - r) / stride + 1);
    let pad = pad as isize;
    Ok(FeatureMap::from_fn(filters.filters(), oh, ow, |k, i, j| {
        let mut acc = 0.0;
        for c in 0..fm.channels() {
            for p in 0..r {
                for q in 0..r {
                    let y = (i * stride + p) as isize - pad;
                    let x = (j * stride + q) as isize - pad;
                    acc += filters.get(k, c, p, q) * fm.get_padded(c, y, x);
                }
            }
        }
        acc
    }))
}

/// Transformed input matrices `V` of one layer plus the tile geometry.
pub fn transform_input(
    fm: &FeatureMap,
    plan: &WinogradPlan,
    pad: usize,
    stats: &mut ConvStats,
) -> Result<(TileGrid, TransformedBatch)> {
    let (grid, tiles) = extract_tiles(fm, plan, pad)?;
    let transformed = tiles
        .into_iter()
        .map(|t| {
            let data = transform_input_tile_counted(plan, &t.data, &mut stats.input_transform)?;
            stats.input_tiles += 1;
            Ok(PlacedTile { data, ..t })
        })
        .collect::<Result<Vec<_>>>()?;
    let v = scatter_to_matrices(&transformed, fm.channels(), &grid, plan.l())?;
    Ok((grid, v))
}

/// Runs the `l²` independent position products in parallel. Each product
/// accumulates in a fixed order, so the result does not depend on the
/// thread schedule.
fn position_products<F>(l: usize, product: F) -> Result<(TransformedBatch, OpCounts)>
where
    F: Fn(usize) -> Result<(ZMortonMatrix, OpCounts)> + Sync + Send,
{
    let results = (0..l * l)
        .into_par_iter()
        .map(product)
        .collect::<Result<Vec<_>>>()?;
    let mut counts = OpCounts::default();
    let mats = results
        .into_iter()
        .map(|(m, c)| {
            counts += c;
            m
        })
        .collect();
    Ok((TransformedBatch::new(l, mats)?, counts))
}

fn finish(
    products: TransformedBatch,
    plan: &WinogradPlan,
    grid: &TileGrid,
    stats: &mut ConvStats,
) -> Result<FeatureMap> {
    let (out, n) = assemble_output(&products, plan, grid, &mut stats.inverse_transform)?;
    stats.output_tiles = n;
    Ok(out)
}

fn check_plan(filters: &FilterBank, plan: &WinogradPlan) -> Result<()> {
    if filters.size() != plan.r() {
        return Err(Error::Shape(format!(
            "{0}x{0} filters do not fit F({1},{2})",
            filters.size(),
            plan.m(),
            plan.r()
        )));
    }
    Ok(())
}

/// Dense Winograd convolution (stride 1).
pub fn winograd_conv_dense(
    fm: &FeatureMap,
    filters: &FilterBank,
    plan: &WinogradPlan,
    pad: usize,
) -> Result<FeatureMap> {
    winograd_conv_dense_counted(fm, filters, plan, pad).map(|(y, _)| y)
}

pub fn winograd_conv_dense_counted(
    fm: &FeatureMap,
    filters: &FilterBank,
    plan: &WinogradPlan,
    pad: usize,
) -> Result<(FeatureMap, ConvStats)> {
    check_conv(fm, filters)?;
    check_plan(filters, plan)?;
    let u = gather_filters(filters, plan)?;
    winograd_conv_transformed(fm, &u, plan, pad)
}

/// Dense Winograd convolution with pre-transformed weights `U` (`K × C`).
pub fn winograd_conv_transformed(
    fm: &FeatureMap,
    u: &TransformedBatch,
    plan: &WinogradPlan,
    pad: usize,
) -> Result<(FeatureMap, ConvStats)> {
    check_weights(fm, u.cols(), u.l(), plan)?;
    let mut stats = ConvStats::default();
    let (grid, v) = transform_input(fm, plan, pad, &mut stats)?;
    let (m, counts) = position_products(plan.l(), |i| {
        let mut c = OpCounts::default();
        let prod = block_matmul(&u.matrices()[i], &v.matrices()[i], &mut c)?;
        Ok((prod, c))
    })?;
    stats.matmul = counts;
    let out = finish(m, plan, &grid, &mut stats)?;
    Ok((out, stats))
}

fn check_weights(fm: &FeatureMap, channels: usize, l: usize, plan: &WinogradPlan) -> Result<()> {
    if l != plan.l() {
        return Err(Error::Shape(format!(
            "weights for tile side {l}, plan has {}",
            plan.l()
        )));
    }
    if channels != fm.channels() {
        return Err(Error::Shape(format!(
            "weights expect {channels} channels, input has {}",
            fm.channels()
        )));
    }
    Ok(())
}

/// Sparse Winograd convolution over pruned, BCOO-compressed weights.
///
/// Block products whose weight block is absent are skipped.
pub fn winograd_conv_sparse(
    fm: &FeatureMap,
    weights: &SparseBatch,
    plan: &WinogradPlan,
    pad: usize,
) -> Result<FeatureMap> {
    winograd_conv_sparse_counted(fm, weights, plan, pad).map(|(y, _)| y)
}

pub fn winograd_conv_sparse_counted(
    fm: &FeatureMap,
    weights: &SparseBatch,
    plan: &WinogradPlan,
    pad: usize,
) -> Result<(FeatureMap, ConvStats)> {
    check_weights(fm, weights.cols(), weights.l(), plan)?;
    let expanded = weights
        .matrices()
        .iter()
        .map(BlockSparse::from_bcoo)
        .collect::<Result<Vec<_>>>()?;
    let mut stats = ConvStats::default();
    let (grid, v) = transform_input(fm, plan, pad, &mut stats)?;
    let (m, counts) = position_products(plan.l(), |i| {
        let mut c = OpCounts::default();
        let prod = block_matmul(&expanded[i], &v.matrices()[i], &mut c)?;
        Ok((prod, c))
    })?;
    stats.matmul = counts;
    let out = finish(m, plan, &grid, &mut stats)?;
    Ok((out, stats))
}
