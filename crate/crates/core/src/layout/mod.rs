//! Memory layouts: Morton addressing, Z-Morton blocked matrices and the
//! tile/matrix scatter used by the Winograd pipeline.

pub mod morton;
pub mod tiling;
pub mod zmorton;

pub use morton::{block_address, block_coords, morton_decode, morton_encode};
pub use tiling::{
    assemble_output, extract_tiles, gather_filters, gather_tiles, scatter_to_matrices, FeatureMap,
    FilterBank, PlacedTile, TileGrid, TransformedBatch,
};
pub use zmorton::{from_zmorton, to_zmorton, ZMortonMatrix};
