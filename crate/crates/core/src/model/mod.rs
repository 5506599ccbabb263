//! Analytical model: data volumes, operation counts, energy and
//! design-space sweeps.

pub mod counts;
pub mod dse;
pub mod energy;

pub use counts::{
    add_counts, feature_dilation, mult_count, tiles, volumes, weight_dilation, AddCountVariant,
    AddCounts, Volumes,
};
pub use dse::{
    dse_sweep, kept_blocks, stage_table, write_dse_csv, DseConfig, DseRow, StageRow, DSE_CSV_HEADER,
};
pub use energy::{
    energy, energy_of, model_layer, model_network, EnergyParams, LayerModel, ModelReport,
};
