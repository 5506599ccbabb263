//! Convolution engine: direct oracle, dense and sparse Winograd layers,
//! the blocked recursive matmul and the auxiliary layers.

pub mod conv;
pub mod layers;
pub mod matmul;
pub mod network;

pub use conv::{
    direct_conv, winograd_conv_dense, winograd_conv_dense_counted, winograd_conv_sparse,
    winograd_conv_sparse_counted, winograd_conv_transformed, ConvStats,
};
pub use layers::{fc_layer, maxpool2, relu};
pub use matmul::{
    block_matmul, block_matmul_sparse, matmul_trace, recursive_matmul, recursive_matmul_counted,
    schedule, BlockOp, BlockOperand, BlockSparse, Schedule,
};
pub use network::{
    run_network, vgg16_spec, ExecMode, LayerSpec, LayerWeights, NetItem, NetworkSpec,
};
