//! Fully-connected, ReLU and 2×2 max-pooling layers.

use crate::counters::OpCounts;
use crate::engine::matmul::{block_matmul, BlockOperand};
use crate::error::{Error, Result};
use crate::layout::{FeatureMap, ZMortonMatrix};

/// `W · x` through the blocked product, with `x` widened to one column.
pub fn fc_layer(x: &[f64], w: &impl BlockOperand) -> Result<Vec<f64>> {
    if w.cols() != x.len() {
        return Err(Error::Shape(format!(
            "weights take {} inputs, vector has {}",
            w.cols(),
            x.len()
        )));
    }
    let mut col = ZMortonMatrix::zeros(x.len(), 1, w.l());
    for (i, v) in x.iter().enumerate() {
        col.set(i, 0, *v);
    }
    let y = block_matmul(w, &col, &mut OpCounts::default())?;
    Ok((0..w.rows()).map(|i| y.get(i, 0)).collect())
}

pub fn relu(fm: &FeatureMap) -> FeatureMap {
    let mut out = fm.clone();
    for v in out.as_mut_slice() {
        *v = v.max(0.0);
    }
    out
}

/// 2×2 window, stride 2. Odd extents round up; windows hanging off the
/// edge take the max over the entries that exist.
pub fn maxpool2(fm: &FeatureMap) -> FeatureMap {
    let (h, w) = (fm.height(), fm.width());
    FeatureMap::from_fn(fm.channels(), h.div_ceil(2), w.div_ceil(2), |c, i, j| {
        let mut best = f64::NEG_INFINITY;
        for y in 2 * i..(2 * i + 2).min(h) {
            for x in 2 * j..(2 * j + 2).min(w) {
                best = best.max(fm.get(c, y, x));
            }
        }
        best
    })
}
