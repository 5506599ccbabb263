//! Closed-form data volumes and operation counts of a Winograd layer.
//!
//! With `T = ⌈H/m⌉·⌈W/m⌉` tiles per channel and `l = m + r − 1`:
//!
//! | quantity | value |
//! |---|---|
//! | `D_wi` transformed inputs | `T·C·l²` |
//! | `D_wo` pre-inverse outputs | `T·K·l²` |
//! | `D_wk` transformed weights | `C·K·l²` |
//! | `M_W` element-wise multiplies | `T·C·K·l²` |
//! | `S_W` channel-sum additions | `T·(C−1)·K·l²` |
//! | `S_B` input-transform additions | `2·T·C·K·l·(nnz(B) − l)` |
//! | `S_A` output-transform additions | `2·T·C·K·l·(nnz(A) − m)` |
//!
//! `S_B` and `S_A` carry a `C·K` factor although each input tile is
//! transformed once per channel and each output tile once per filter;
//! [`AddCountVariant::PerOperand`] uses `C` and `K` respectively instead.

use crate::engine::network::LayerSpec;
use crate::transform::WinogradPlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Volumes {
    pub d_wi: u64,
    pub d_wo: u64,
    pub d_wk: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AddCounts {
    pub s_w: u64,
    pub s_b: u64,
    pub s_a: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AddCountVariant {
    /// `C·K` factor on both transform terms.
    #[default]
    Joint,
    /// `C` for the input transform, `K` for the inverse.
    PerOperand,
}

/// `⌈H/m⌉·⌈W/m⌉`.
pub fn tiles(layer: &LayerSpec, m: usize) -> u64 {
    (layer.h.div_ceil(m) * layer.w.div_ceil(m)) as u64
}

fn side(m: usize, r: usize) -> u64 {
    (m + r - 1) as u64
}

pub fn volumes(layer: &LayerSpec, m: usize, r: usize) -> Volumes {
    let (t, l2) = (tiles(layer, m), side(m, r).pow(2));
    let (c, k) = (layer.c as u64, layer.k as u64);
    Volumes {
        d_wi: t * c * l2,
        d_wo: t * k * l2,
        d_wk: c * k * l2,
    }
}

pub fn mult_count(layer: &LayerSpec, m: usize, r: usize) -> u64 {
    tiles(layer, m) * (layer.c * layer.k) as u64 * side(m, r).pow(2)
}

pub fn add_counts(layer: &LayerSpec, plan: &WinogradPlan, variant: AddCountVariant) -> AddCounts {
    let (m, l) = (plan.m() as u64, plan.l() as u64);
    let t = tiles(layer, plan.m());
    let (c, k) = (layer.c as u64, layer.k as u64);
    let (b_extra, a_extra) = (plan.nnz_b() as u64 - l, plan.nnz_a() as u64 - m);
    let (fb, fa) = match variant {
        AddCountVariant::Joint => (c * k, c * k),
        AddCountVariant::PerOperand => (c, k),
    };
    AddCounts {
        s_w: t * c.saturating_sub(1) * k * l * l,
        s_b: 2 * t * fb * l * b_extra,
        s_a: 2 * t * fa * l * a_extra,
    }
}

/// Growth of one filter under the transform: `l²/r²`.
pub fn weight_dilation(m: usize, r: usize) -> f64 {
    (side(m, r) as f64 / r as f64).powi(2)
}

/// Growth of the feature map under tiling: `(l/m)²`.
pub fn feature_dilation(m: usize, r: usize) -> f64 {
    (side(m, r) as f64 / m as f64).powi(2)
}
