//! Simulation results and their CSV form.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;

/// Counters from one simulated run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SimReport {
    pub total_cycles: u64,
    /// Blocks loaded from external memory into the shared FIFOs.
    pub external_block_fetches: u64,
    /// Operand deliveries served by sharing within a step or a FIFO hit.
    pub local_block_fetches: u64,
    pub block_matmuls: u64,
    /// Fetches four independent arrays would need: two per block product.
    pub unshared_fetch_estimate: u64,
    pub multiplications: u64,
    pub array_busy_cycles: Vec<u64>,
    pub steps: u64,
    /// Cycles lost waiting for weight decompression.
    pub decompress_stall_cycles: u64,
}

impl SimReport {
    /// Unshared fetch estimate over external fetches; 1 when nothing was fetched.
    pub fn bandwidth_reduction_factor(&self) -> f64 {
        if self.external_block_fetches == 0 {
            1.0
        } else {
            self.unshared_fetch_estimate as f64 / self.external_block_fetches as f64
        }
    }

    /// Adds the counters of `other`, leaving cycles and busy times alone.
    pub fn absorb_counters(&mut self, other: &SimReport) {
        self.external_block_fetches += other.external_block_fetches;
        self.local_block_fetches += other.local_block_fetches;
        self.block_matmuls += other.block_matmuls;
        self.unshared_fetch_estimate += other.unshared_fetch_estimate;
        self.multiplications += other.multiplications;
        self.steps += other.steps;
        self.decompress_stall_cycles += other.decompress_stall_cycles;
    }
}

/// One CSV row: `layer,m,sparsity,cycles,ext_fetches,local_fetches,block_matmuls,bw_reduction`.
#[derive(Debug, Clone, Serialize)]
pub struct SimRow {
    pub layer: String,
    pub m: usize,
    pub sparsity: f64,
    pub cycles: u64,
    pub ext_fetches: u64,
    pub local_fetches: u64,
    pub block_matmuls: u64,
    pub bw_reduction: String,
}

impl SimRow {
    pub fn new(layer: &str, m: usize, sparsity: f64, r: &SimReport) -> Self {
        Self {
            layer: layer.to_string(),
            m,
            sparsity,
            cycles: r.total_cycles,
            ext_fetches: r.external_block_fetches,
            local_fetches: r.local_block_fetches,
            block_matmuls: r.block_matmuls,
            bw_reduction: format!("{:.4}", r.bandwidth_reduction_factor()),
        }
    }
}

pub const SIM_CSV_HEADER: [&str; 8] = [
    "layer",
    "m",
    "sparsity",
    "cycles",
    "ext_fetches",
    "local_fetches",
    "block_matmuls",
    "bw_reduction",
];

/// Writes the header, then one row per entry.
pub fn write_sim_csv(w: impl Write, rows: &[SimRow]) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(SIM_CSV_HEADER)?;
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_only_when_empty() {
        let mut buf = Vec::new();
        write_sim_csv(&mut buf, &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "layer,m,sparsity,cycles,ext_fetches,local_fetches,block_matmuls,bw_reduction\n"
        );
    }

    #[test]
    fn factor_from_counts() {
        let r = SimReport {
            external_block_fetches: 4,
            unshared_fetch_estimate: 8,
            ..Default::default()
        };
        assert_eq!(r.bandwidth_reduction_factor(), 2.0);
        let mut buf = Vec::new();
        write_sim_csv(&mut buf, &[SimRow::new("x", 2, 0.5, &r)]).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .ends_with("x,2,0.5,0,4,0,0,2.0000\n"));
    }
}
