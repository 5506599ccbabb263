//! Architecture parameters and cycle-cost constants.

use crate::error::{Error, Result};

/// Accelerator description. Cycle constants derived from `l` are refreshed
/// by [`ArchConfig::retile`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchConfig {
    /// Systolic array side; equals the Winograd tile side.
    pub l: usize,
    pub clusters: usize,
    /// Always 4: one array per output quadrant.
    pub arrays_per_cluster: usize,
    pub transform_arrays: usize,
    /// Capacity, in blocks, of each circular FIFO (weights and features).
    pub fifo_depth: usize,
    /// Cycles between consecutive block products on one array.
    pub issue_cycles: u64,
    /// Cycles for the first result to drain out of an array.
    pub pipeline_fill: u64,
    /// Cycles for one pass of a tile through a transform array.
    pub transform_pass_cycles: u64,
    /// Decompression latency of a weight block per stored nonzero.
    pub decompress_cycles_per_nonzero: u64,
    /// Seed for the synthetic block-sparsity masks.
    pub seed: u64,
}

impl ArchConfig {
    pub fn new(l: usize) -> Self {
        let l64 = l as u64;
        Self {
            l,
            clusters: 8,
            arrays_per_cluster: 4,
            transform_arrays: 16,
            fifo_depth: 16,
            issue_cycles: l64,
            pipeline_fill: 2 * l64.saturating_sub(1),
            transform_pass_cycles: l64 + 2 * l64.saturating_sub(1),
            decompress_cycles_per_nonzero: 1,
            seed: 0,
        }
    }

    /// Same configuration for a different array side, with the `l`-derived
    /// cycle constants recomputed.
    pub fn retile(&self, l: usize) -> Self {
        let fresh = Self::new(l);
        Self {
            l,
            issue_cycles: fresh.issue_cycles,
            pipeline_fill: fresh.pipeline_fill,
            transform_pass_cycles: fresh.transform_pass_cycles,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("l", self.l),
            ("clusters", self.clusters),
            ("transform_arrays", self.transform_arrays),
            ("issue_cycles", self.issue_cycles as usize),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be at least 1")));
        }
        if self.arrays_per_cluster != 4 {
            return Err(Error::Config(format!(
                "a cluster holds exactly 4 arrays, got {}",
                self.arrays_per_cluster
            )));
        }
        Ok(())
    }
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self::new(4)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_for_l4() {
        let c = ArchConfig::default();
        assert_eq!(
            (c.issue_cycles, c.pipeline_fill, c.transform_pass_cycles),
            (4, 6, 10)
        );
        assert_eq!((c.clusters, c.transform_arrays), (8, 16));
        c.validate().unwrap();
    }

    #[test]
    fn retile_keeps_overrides() {
        let c = ArchConfig {
            clusters: 3,
            ..ArchConfig::default()
        };
        let r = c.retile(6);
        assert_eq!(
            (r.l, r.clusters, r.issue_cycles, r.pipeline_fill),
            (6, 3, 6, 10)
        );
    }

    #[test]
    fn rejects_bad_counts() {
        let c = ArchConfig {
            arrays_per_cluster: 2,
            ..ArchConfig::default()
        };
        assert!(c.validate().is_err());
        let c = ArchConfig {
            clusters: 0,
            ..ArchConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
