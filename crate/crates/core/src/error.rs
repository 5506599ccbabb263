use thiserror::Error;

use crate::bcoo::BcooError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid Winograd parameters: {0}")]
    InvalidPlan(String),

    #[error("interpolation system for F({m},{r}) is numerically singular (residual {residual:e})")]
    SingularPlan { m: usize, r: usize, residual: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("morton coordinate ({row}, {col}) does not fit in a 64-bit index")]
    MortonOverflow { row: u64, col: u64 },

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("network shape chain broken at item {index} ({name}): {reason}")]
    ShapeChain {
        index: usize,
        name: String,
        reason: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Bcoo(#[from] BcooError),

    #[error("malformed container: {0}")]
    Container(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("network spec parse error: {0}")]
    SpecParse(#[from] toml::de::Error),
}
