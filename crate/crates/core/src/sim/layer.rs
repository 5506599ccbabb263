//! Whole-layer timing: transform arrays, clusters of matmul arrays and the
//! inverse transform, run as three back-to-back stages.
//!
//! The `l²` position products `U·V` go round-robin to the clusters; a
//! cluster works through its products one after another. Sparse layers use
//! synthetic block masks: every logical weight block of a position gets a
//! seeded random priority and the `round((1−s)·n)` highest survive, so the
//! masks for increasing sparsity are nested.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::engine::matmul::BlockOp;
use crate::engine::network::LayerSpec;
use crate::error::{Error, Result};
use crate::layout::{block_address, TileGrid, ZMortonMatrix};
use crate::sim::cluster::{run_structure, Structure};
use crate::sim::config::ArchConfig;
use crate::sim::report::SimReport;
use crate::sim::transform::simulate_transform;
use crate::transform::WinogradPlan;

fn valid(n: usize, block: usize, l: usize) -> u64 {
    n.saturating_sub(block * l).min(l) as u64
}

/// Surviving weight blocks of one position, indexed by Morton address.
pub fn block_mask(
    k: usize,
    c: usize,
    l: usize,
    sparsity: f64,
    seed: u64,
    position: usize,
) -> Vec<bool> {
    let shape = ZMortonMatrix::zeros(k, c, l);
    let (gr, gc) = (shape.grid_rows(), shape.grid_cols());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(position as u64);
    let mut logical: Vec<(u64, usize)> = Vec::new();
    for br in 0..k.div_ceil(l) {
        for bc in 0..c.div_ceil(l) {
            logical.push((0, block_address(br, bc, gr, gc)));
        }
    }
    logical.sort_by_key(|&(_, a)| a);
    for entry in &mut logical {
        entry.0 = rng.gen();
    }
    let keep = ((1.0 - sparsity) * logical.len() as f64).round() as usize;
    logical.sort();
    let mut mask = vec![false; gr * gc];
    for &(_, a) in logical.iter().rev().take(keep) {
        mask[a] = true;
    }
    mask
}

/// Simulates one convolution layer at the given weight block sparsity.
pub fn simulate_layer(
    layer: &LayerSpec,
    plan: &WinogradPlan,
    cfg: &ArchConfig,
    sparsity: f64,
) -> Result<SimReport> {
    cfg.validate()?;
    if cfg.l != plan.l() {
        return Err(Error::Config(format!(
            "arrays are {0}x{0} but F({1},{2}) tiles are {3}x{3}",
            cfg.l,
            plan.m(),
            plan.r(),
            plan.l()
        )));
    }
    if !(0.0..=1.0).contains(&sparsity) {
        return Err(Error::Config(format!(
            "sparsity {sparsity} is outside [0, 1]"
        )));
    }
    if layer.stride != 1 || layer.r != plan.r() {
        return Err(Error::Geometry(format!(
            "layer {} needs stride 1 and {1}x{1} filters",
            layer.name,
            plan.r()
        )));
    }
    let grid = TileGrid::new(layer.h, layer.w, plan, layer.pad)?;
    let (l, kn, cn, pn) = (plan.l(), layer.k, layer.c, grid.positions());
    let u_shape = ZMortonMatrix::zeros(kn, cn, l);
    let v_shape = ZMortonMatrix::zeros(cn, pn, l);
    let (mb, kb, nb) = (
        u_shape.grid_rows(),
        u_shape.grid_cols(),
        v_shape.grid_cols(),
    );

    let input = simulate_transform((cn * pn) as u64, cfg);
    let inverse = simulate_transform((kn * pn) as u64, cfg);

    let op_mults =
        |op: &BlockOp| valid(kn, op.a.0, l) * valid(cn, op.a.1, l) * valid(pn, op.b.1, l);
    let run_position = |position: usize| {
        let mask = (sparsity > 0.0).then(|| block_mask(kn, cn, l, sparsity, cfg.seed, position));
        let weight_nnz = |br: usize, bc: usize| {
            let logical = valid(kn, br, l) * valid(cn, bc, l);
            let present = match &mask {
                Some(m) => m[block_address(br, bc, mb, kb)],
                None => logical > 0,
            };
            present.then_some(logical)
        };
        let s = Structure {
            mb,
            kb,
            nb,
            weight_nnz: &weight_nnz,
            op_mults: &op_mults,
            sparse: mask.is_some(),
        };
        run_structure(&s, cfg, false).report
    };
    let positions = l * l;
    let per_position: Vec<SimReport> = if sparsity > 0.0 {
        (0..positions).into_par_iter().map(run_position).collect()
    } else {
        vec![run_position(0); positions]
    };

    let arrays = cfg.arrays_per_cluster;
    let mut report = SimReport {
        array_busy_cycles: vec![0; cfg.clusters * arrays],
        ..Default::default()
    };
    let mut cluster_time = vec![0u64; cfg.clusters];
    for (i, r) in per_position.iter().enumerate() {
        let cl = i % cfg.clusters;
        cluster_time[cl] += r.total_cycles;
        for (a, busy) in r.array_busy_cycles.iter().enumerate() {
            report.array_busy_cycles[cl * arrays + a] += busy;
        }
        report.absorb_counters(r);
    }
    let matmul = cluster_time.iter().copied().max().unwrap_or(0);
    report.total_cycles = input.total_cycles + matmul + inverse.total_cycles;
    Ok(report)
}

/// Number of sequential waves when `l²` products share `clusters` clusters.
pub fn waves(l: usize, clusters: usize) -> usize {
    (l * l).div_ceil(clusters)
}
