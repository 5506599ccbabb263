//! Design-space sweeps over the output tile size `m` and weight sparsity.
//!
//! Each `(m, sparsity, layer)` point combines the analytical counts with
//! the simulated latency. Sparsity affects the analytical side only through
//! the surviving weight-block fraction `keep / n`, where `n` is the number
//! of logical `l×l` weight blocks and `keep = round((1 − s)·n)` (the same
//! rule the simulator's masks use): `M_W` and `D_wk` are scaled by it and
//! rounded to the nearest integer. Feature-map volumes and additions are
//! unchanged.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::network::{LayerSpec, NetworkSpec};
use crate::error::{Error, Result};
use crate::model::counts::{
    add_counts, feature_dilation, mult_count, volumes, weight_dilation, AddCountVariant,
};
use crate::model::energy::{energy_of, EnergyParams};
use crate::sim::{simulate_layer, ArchConfig};
use crate::transform::make_plan;

/// One CSV row of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DseRow {
    pub layer: String,
    pub m: usize,
    pub sparsity: f64,
    pub d_wi: u64,
    pub d_wo: u64,
    pub d_wk: u64,
    pub m_w: u64,
    pub s_w: u64,
    pub s_b: u64,
    pub s_a: u64,
    pub e_tot: f64,
    pub weight_dilation: f64,
    pub feature_dilation: f64,
    pub cycles: u64,
    pub ext_fetches: u64,
    pub local_fetches: u64,
    pub block_matmuls: u64,
    pub bw_reduction: f64,
}

pub const DSE_CSV_HEADER: [&str; 18] = [
    "layer",
    "m",
    "sparsity",
    "d_wi",
    "d_wo",
    "d_wk",
    "m_w",
    "s_w",
    "s_b",
    "s_a",
    "e_tot",
    "weight_dilation",
    "feature_dilation",
    "cycles",
    "ext_fetches",
    "local_fetches",
    "block_matmuls",
    "bw_reduction",
];

#[derive(Debug, Clone)]
pub struct DseConfig {
    pub r: usize,
    pub m_values: Vec<usize>,
    pub sparsities: Vec<f64>,
    pub energy: EnergyParams,
    pub arch: ArchConfig,
    pub variant: AddCountVariant,
}

fn scale(x: u64, keep: u64, n: u64) -> u64 {
    if n == 0 {
        return x;
    }
    ((x as u128 * keep as u128 + n as u128 / 2) / n as u128) as u64
}

/// Surviving and total logical weight blocks for a layer.
pub fn kept_blocks(layer: &LayerSpec, l: usize, sparsity: f64) -> (u64, u64) {
    let n = (layer.k.div_ceil(l) * layer.c.div_ceil(l)) as u64;
    let keep = ((1.0 - sparsity) * n as f64).round() as u64;
    (keep, n)
}

fn point(layer: &LayerSpec, m: usize, sparsity: f64, cfg: &DseConfig) -> Result<DseRow> {
    let plan = make_plan(m, cfg.r)?;
    let l = plan.l();
    let (keep, n) = kept_blocks(layer, l, sparsity);
    let mut v = volumes(layer, m, cfg.r);
    v.d_wk = scale(v.d_wk, keep, n);
    let m_w = scale(mult_count(layer, m, cfg.r), keep, n);
    let adds = add_counts(layer, &plan, cfg.variant);
    let sim = simulate_layer(layer, &plan, &cfg.arch.retile(l), sparsity)?;
    Ok(DseRow {
        layer: layer.name.clone(),
        m,
        sparsity,
        d_wi: v.d_wi,
        d_wo: v.d_wo,
        d_wk: v.d_wk,
        m_w,
        s_w: adds.s_w,
        s_b: adds.s_b,
        s_a: adds.s_a,
        e_tot: energy_of(&v, m_w, &adds, &cfg.energy),
        weight_dilation: weight_dilation(m, cfg.r),
        feature_dilation: feature_dilation(m, cfg.r),
        cycles: sim.total_cycles,
        ext_fetches: sim.external_block_fetches,
        local_fetches: sim.local_block_fetches,
        block_matmuls: sim.block_matmuls,
        bw_reduction: sim.bandwidth_reduction_factor(),
    })
}

/// Rows ordered by `m`, then sparsity, then layer. Points are evaluated in
/// parallel; the order never depends on the schedule.
pub fn dse_sweep(net: &NetworkSpec, cfg: &DseConfig) -> Result<Vec<DseRow>> {
    if cfg.m_values.is_empty() || cfg.sparsities.is_empty() {
        return Err(Error::Config(
            "sweeps need at least one m and one sparsity".into(),
        ));
    }
    cfg.energy.validate()?;
    let layers: Vec<&LayerSpec> = net.convs().collect();
    let mut jobs = Vec::new();
    for &m in &cfg.m_values {
        for &s in &cfg.sparsities {
            for layer in &layers {
                jobs.push((*layer, m, s));
            }
        }
    }
    jobs.par_iter()
        .map(|(layer, m, s)| point(layer, *m, *s, cfg))
        .collect()
}

pub fn write_dse_csv(w: impl Write, rows: &[DseRow]) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(DSE_CSV_HEADER)?;
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

/// Per-stage summary: stages are the name prefixes before `_`
/// (`conv3_2` belongs to `conv3`), reported from each stage's last layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageRow {
    pub stage: String,
    pub layers: usize,
    pub d_wi: u64,
    pub d_wk: u64,
}

pub fn stage_table(net: &NetworkSpec, m: usize, r: usize) -> Vec<StageRow> {
    let mut rows: Vec<StageRow> = Vec::new();
    for layer in net.convs() {
        let stage = layer
            .name
            .split('_')
            .next()
            .unwrap_or(&layer.name)
            .to_string();
        let v = volumes(layer, m, r);
        match rows.last_mut() {
            Some(row) if row.stage == stage => {
                row.layers += 1;
                row.d_wi = v.d_wi;
                row.d_wk = v.d_wk;
            }
            _ => rows.push(StageRow {
                stage,
                layers: 1,
                d_wi: v.d_wi,
                d_wk: v.d_wk,
            }),
        }
    }
    rows
}
