//! Sparse Winograd convolution on Z-Morton block layouts.
//!
//! The crate covers the fast-convolution transforms, the blocked memory
//! layouts and block-sparse weight format, a dense/sparse convolution
//! engine, a cycle-level model of a clustered systolic accelerator and an
//! analytical data-movement and energy model.

pub mod bcoo;
pub mod counters;
pub mod engine;
pub mod error;
pub mod io;
pub mod layout;
pub mod matrix;
pub mod model;
pub mod sim;
pub mod transform;

pub use counters::OpCounts;
pub use error::{Error, Result};
pub use matrix::Matrix;
