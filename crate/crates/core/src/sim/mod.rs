//! Block-level model of the accelerator: transform arrays, four-array
//! clusters with shared circular FIFOs, and multi-cluster layer scheduling.
//!
//! The simulator is single-threaded per product and fully deterministic.

pub mod cluster;
pub mod config;
pub mod layer;
pub mod report;
pub mod transform;

pub use cluster::{simulate_cluster_dense, simulate_cluster_sparse, ClusterRun, StepRecord};
pub use config::ArchConfig;
pub use layer::{block_mask, simulate_layer, waves};
pub use report::{write_sim_csv, SimReport, SimRow, SIM_CSV_HEADER};
pub use transform::{simulate_transform, systolic_transform, transform_cycles};
