//! Network descriptions and layer-by-layer execution.
//!
//! A network spec is a TOML file with one `[[layer]]` table per item:
//!
//! ```toml
//! [[layer]]
//! kind = "conv"      # conv (default) | relu | maxpool | fc
//! name = "conv1_1"
//! h = 224
//! w = 224
//! c = 3
//! k = 64
//! r = 3
//! pad = 1
//! stride = 1         # optional, default 1
//!
//! [[layer]]
//! kind = "fc"
//! name = "fc1"
//! inputs = 25088
//! outputs = 4096
//! ```
//!
//! `relu` and `maxpool` items need only a name. Shapes must chain:
//! each convolution's `(c, h, w)` equals the previous item's output.

use serde::Deserialize;

use crate::bcoo::{prune, SparseBatch};
use crate::engine::conv::{direct_conv, winograd_conv_dense, winograd_conv_sparse};
use crate::engine::layers::{fc_layer, maxpool2, relu};
use crate::error::{Error, Result};
use crate::layout::{gather_filters, FeatureMap, FilterBank, ZMortonMatrix};
use crate::matrix::Matrix;
use crate::transform::WinogradPlan;

/// Geometry of one convolution layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub k: usize,
    pub r: usize,
    pub pad: usize,
    pub stride: usize,
}

impl LayerSpec {
    pub fn new(name: &str, h: usize, w: usize, c: usize, k: usize) -> Self {
        Self {
            name: name.to_string(),
            h,
            w,
            c,
            k,
            r: 3,
            pad: 1,
            stride: 1,
        }
    }

    pub fn output_hw(&self) -> Result<(usize, usize)> {
        let (hp, wp) = (self.h + 2 * self.pad, self.w + 2 * self.pad);
        if self.stride == 0 || self.r == 0 || hp < self.r || wp < self.r {
            return Err(Error::Geometry(format!(
                "layer {} has no valid output extent",
                self.name
            )));
        }
        Ok((
            (hp - self.r) / self.stride + 1,
            (wp - self.r) / self.stride + 1,
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NetItem {
    Conv(LayerSpec),
    Relu {
        name: String,
    },
    MaxPool {
        name: String,
    },
    Fc {
        name: String,
        inputs: usize,
        outputs: usize,
    },
}

impl NetItem {
    pub fn name(&self) -> &str {
        match self {
            NetItem::Conv(l) => &l.name,
            NetItem::Relu { name } | NetItem::MaxPool { name } | NetItem::Fc { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NetworkSpec {
    pub items: Vec<NetItem>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    #[serde(default)]
    layer: Vec<RawItem>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawItem {
    #[serde(default = "default_kind")]
    kind: String,
    name: String,
    h: Option<usize>,
    w: Option<usize>,
    c: Option<usize>,
    k: Option<usize>,
    r: Option<usize>,
    pad: Option<usize>,
    stride: Option<usize>,
    inputs: Option<usize>,
    outputs: Option<usize>,
}

fn default_kind() -> String {
    "conv".into()
}

fn required(v: Option<usize>, field: &str, index: usize, name: &str) -> Result<usize> {
    v.ok_or_else(|| Error::ShapeChain {
        index,
        name: name.to_string(),
        reason: format!("missing field `{field}`"),
    })
}

impl NetworkSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawSpec = toml::from_str(text)?;
        let mut items = Vec::with_capacity(raw.layer.len());
        for (i, it) in raw.layer.into_iter().enumerate() {
            let name = it.name.clone();
            let item = match it.kind.as_str() {
                "conv" => NetItem::Conv(LayerSpec {
                    h: required(it.h, "h", i, &name)?,
                    w: required(it.w, "w", i, &name)?,
                    c: required(it.c, "c", i, &name)?,
                    k: required(it.k, "k", i, &name)?,
                    r: required(it.r, "r", i, &name)?,
                    pad: it.pad.unwrap_or(0),
                    stride: it.stride.unwrap_or(1),
                    name,
                }),
                "relu" => NetItem::Relu { name },
                "maxpool" => NetItem::MaxPool { name },
                "fc" => NetItem::Fc {
                    inputs: required(it.inputs, "inputs", i, &name)?,
                    outputs: required(it.outputs, "outputs", i, &name)?,
                    name,
                },
                other => {
                    return Err(Error::ShapeChain {
                        index: i,
                        name,
                        reason: format!("unknown kind `{other}`"),
                    })
                }
            };
            items.push(item);
        }
        let net = Self { items };
        net.validate()?;
        Ok(net)
    }

    pub fn convs(&self) -> impl Iterator<Item = &LayerSpec> {
        self.items.iter().filter_map(|it| match it {
            NetItem::Conv(l) => Some(l),
            _ => None,
        })
    }

    /// Checks that every item accepts its predecessor's output; returns the
    /// final `(channels, height, width)` if the network is non-empty.
    pub fn validate(&self) -> Result<Option<(usize, usize, usize)>> {
        let mut shape: Option<(usize, usize, usize)> = None;
        for (index, item) in self.items.iter().enumerate() {
            let fail = |reason: String| Error::ShapeChain {
                index,
                name: item.name().to_string(),
                reason,
            };
            shape = match item {
                NetItem::Conv(l) => {
                    if l.r % 2 == 0 {
                        return Err(fail(format!("filter size {} is not odd", l.r)));
                    }
                    if let Some(s) = shape {
                        if s != (l.c, l.h, l.w) {
                            return Err(fail(format!(
                                "expects {}x{}x{}, receives {}x{}x{}",
                                l.c, l.h, l.w, s.0, s.1, s.2
                            )));
                        }
                    }
                    let (oh, ow) = l.output_hw().map_err(|e| fail(e.to_string()))?;
                    Some((l.k, oh, ow))
                }
                NetItem::Relu { .. } => shape,
                NetItem::MaxPool { .. } => shape.map(|(c, h, w)| (c, h.div_ceil(2), w.div_ceil(2))),
                NetItem::Fc {
                    inputs, outputs, ..
                } => {
                    if let Some((c, h, w)) = shape {
                        if c * h * w != *inputs {
                            return Err(fail(format!(
                                "expects {inputs} inputs, receives {}",
                                c * h * w
                            )));
                        }
                    }
                    Some((*outputs, 1, 1))
                }
            };
        }
        Ok(shape)
    }
}

/// The VGG16-style stage structure: 3×3 convolutions with unit padding,
/// each followed by ReLU, with 2×2 max-pooling between stages.
///
/// Stages (convolutions × output channels @ input extent): 2×64 @ 224,
/// 3×128 @ 112, 4×256 @ 56, 4×512 @ 28, 4×512 @ 14, 1×512 @ 7.
pub fn vgg16_spec() -> NetworkSpec {
    let stages: [(usize, usize, usize); 6] = [
        (2, 64, 224),
        (3, 128, 112),
        (4, 256, 56),
        (4, 512, 28),
        (4, 512, 14),
        (1, 512, 7),
    ];
    let mut items = Vec::new();
    let mut channels = 3;
    for (s, &(count, k, hw)) in stages.iter().enumerate() {
        if s > 0 {
            items.push(NetItem::MaxPool {
                name: format!("pool{s}"),
            });
        }
        for i in 0..count {
            let name = format!("conv{}_{}", s + 1, i + 1);
            items.push(NetItem::Conv(LayerSpec::new(&name, hw, hw, channels, k)));
            items.push(NetItem::Relu {
                name: format!("relu{}_{}", s + 1, i + 1),
            });
            channels = k;
        }
    }
    NetworkSpec { items }
}

/// Weights for one weighted item, in network order.
#[derive(Debug, Clone)]
pub enum LayerWeights {
    Conv(FilterBank),
    /// `outputs × inputs`.
    Fc(Matrix),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExecMode {
    Direct,
    DenseWinograd,
    /// Transformed weights are magnitude-pruned to `sparsity` and stored as BCOO.
    SparseWinograd {
        sparsity: f64,
    },
}

/// Runs every item in order. Convolution and FC weights are consumed from
/// `weights` in sequence.
pub fn run_network(
    net: &NetworkSpec,
    input: &FeatureMap,
    weights: &[LayerWeights],
    mode: ExecMode,
    plan: &WinogradPlan,
) -> Result<FeatureMap> {
    net.validate()?;
    let mut next = weights.iter();
    let mut x = input.clone();
    for (index, item) in net.items.iter().enumerate() {
        let fail = |reason: String| Error::ShapeChain {
            index,
            name: item.name().to_string(),
            reason,
        };
        x = match item {
            NetItem::Conv(l) => {
                let Some(LayerWeights::Conv(g)) = next.next() else {
                    return Err(fail("missing convolution weights".into()));
                };
                if (x.channels(), x.height(), x.width()) != (l.c, l.h, l.w) {
                    return Err(fail("input does not match layer geometry".into()));
                }
                if g.filters() != l.k || g.channels() != l.c || g.size() != l.r {
                    return Err(fail("filter bank does not match layer geometry".into()));
                }
                if mode != ExecMode::Direct && l.stride != 1 {
                    return Err(fail("Winograd layers require stride 1".into()));
                }
                match mode {
                    ExecMode::Direct => direct_conv(&x, g, l.stride, l.pad)?,
                    ExecMode::DenseWinograd => winograd_conv_dense(&x, g, plan, l.pad)?,
                    ExecMode::SparseWinograd { sparsity } => {
                        let u = prune(&gather_filters(g, plan)?, sparsity)?;
                        winograd_conv_sparse(&x, &SparseBatch::encode(&u), plan, l.pad)?
                    }
                }
            }
            NetItem::Relu { .. } => relu(&x),
            NetItem::MaxPool { .. } => maxpool2(&x),
            NetItem::Fc { outputs, .. } => {
                let Some(LayerWeights::Fc(w)) = next.next() else {
                    return Err(fail("missing FC weights".into()));
                };
                let zw = ZMortonMatrix::from_dense(w, plan.l());
                let y = fc_layer(x.as_slice(), &zw).map_err(|e| fail(e.to_string()))?;
                FeatureMap::new(*outputs, 1, 1, y)?
            }
        };
    }
    Ok(x)
}
