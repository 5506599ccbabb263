//! Overlapped tiling of feature maps and the scatter/gather between tiles and
//! the `l²` per-position matrices.
//!
//! For every tile position `(ĩ, ĵ)` the transformed inputs form a `C × P`
//! matrix `V` and the transformed filters a `K × C` matrix `U`, where `P` is
//! the number of tiles per channel. Tile `(x̃, ỹ)` maps to column
//! `b = x̃ · tiles_y + ỹ`.

use crate::counters::OpCounts;
use crate::error::{Error, Result};
use crate::layout::zmorton::ZMortonMatrix;
use crate::matrix::Matrix;
use crate::transform::{inverse_transform_counted, transform_filter, WinogradPlan};

/// `C` channels of `H × W` values, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::Geometry(format!(
                "feature map {channels}x{height}x{width} has an empty extent"
            )));
        }
        if data.len() != channels * height * width {
            return Err(Error::Shape(format!(
                "{} values for a {channels}x{height}x{width} feature map",
                data.len()
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self::new(
            channels,
            height,
            width,
            vec![0.0; channels * height * width],
        )
        .expect("non-empty extents")
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for i in 0..height {
                for j in 0..width {
                    data.push(f(c, i, j));
                }
            }
        }
        Self::new(channels, height, width, data).expect("non-empty extents")
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, c: usize, i: usize, j: usize) -> f64 {
        self.data[(c * self.height + i) * self.width + j]
    }

    /// Reads with zero padding: coordinates are signed offsets into the map.
    #[inline]
    pub fn get_padded(&self, c: usize, i: isize, j: isize) -> f64 {
        if i < 0 || j < 0 || i as usize >= self.height || j as usize >= self.width {
            0.0
        } else {
            self.get(c, i as usize, j as usize)
        }
    }

    #[inline]
    pub fn set(&mut self, c: usize, i: usize, j: usize, v: f64) {
        self.data[(c * self.height + i) * self.width + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |a - b| / max |self|`, the normwise relative error against `self`
    /// as reference.
    pub fn relative_error(&self, other: &FeatureMap) -> f64 {
        assert_eq!(
            (self.channels, self.height, self.width),
            (other.channels, other.height, other.width),
            "comparing feature maps of different shapes"
        );
        let diff = self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let scale = self.max_abs();
        if scale == 0.0 {
            diff
        } else {
            diff / scale
        }
    }
}

/// `K` filters of `C × r × r`, filter-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    filters: usize,
    channels: usize,
    size: usize,
    data: Vec<f64>,
}

impl FilterBank {
    pub fn new(filters: usize, channels: usize, size: usize, data: Vec<f64>) -> Result<Self> {
        if filters == 0 || channels == 0 || size == 0 {
            return Err(Error::Geometry(format!(
                "filter bank {filters}x{channels}x{size}x{size} has an empty extent"
            )));
        }
        if data.len() != filters * channels * size * size {
            return Err(Error::Shape(format!(
                "{} values for a {filters}x{channels}x{size}x{size} filter bank",
                data.len()
            )));
        }
        Ok(Self {
            filters,
            channels,
            size,
            data,
        })
    }

    pub fn from_fn(
        filters: usize,
        channels: usize,
        size: usize,
        mut f: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(filters * channels * size * size);
        for k in 0..filters {
            for c in 0..channels {
                for p in 0..size {
                    for q in 0..size {
                        data.push(f(k, c, p, q));
                    }
                }
            }
        }
        Self::new(filters, channels, size, data).expect("non-empty extents")
    }

    pub fn filters(&self) -> usize {
        self.filters
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Filter width `r`.
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, k: usize, c: usize, p: usize, q: usize) -> f64 {
        self.data[((k * self.channels + c) * self.size + p) * self.size + q]
    }

    /// The `r×r` kernel of filter `k` on channel `c`.
    pub fn kernel(&self, k: usize, c: usize) -> Matrix {
        Matrix::from_fn(self.size, self.size, |p, q| self.get(k, c, p, q))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Geometry of the output tiling for one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileGrid {
    pub out_height: usize,
    pub out_width: usize,
    pub tiles_x: usize,
    pub tiles_y: usize,
    pub m: usize,
    pub pad: usize,
}

impl TileGrid {
    pub fn new(height: usize, width: usize, plan: &WinogradPlan, pad: usize) -> Result<Self> {
        let (m, r) = (plan.m(), plan.r());
        if height + 2 * pad < r || width + 2 * pad < r {
            return Err(Error::Geometry(format!(
                "{height}x{width} input with pad {pad} is smaller than a {r}x{r} filter"
            )));
        }
        let out_height = height + 2 * pad - r + 1;
        let out_width = width + 2 * pad - r + 1;
        Ok(Self {
            out_height,
            out_width,
            tiles_x: out_height.div_ceil(m),
            tiles_y: out_width.div_ceil(m),
            m,
            pad,
        })
    }

    /// Tiles per channel, `P`.
    pub fn positions(&self) -> usize {
        self.tiles_x * self.tiles_y
    }

    /// Collapsed tile index `b`.
    pub fn collapse(&self, tx: usize, ty: usize) -> usize {
        tx * self.tiles_y + ty
    }

    pub fn expand(&self, b: usize) -> (usize, usize) {
        (b / self.tiles_y, b % self.tiles_y)
    }
}

/// A tile tagged with its channel (or filter) and tile coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacedTile {
    pub channel: usize,
    pub tx: usize,
    pub ty: usize,
    pub data: Matrix,
}

/// Cuts every channel into `l×l` tiles at stride `m` over the zero-padded input.
///
/// Adjacent tiles overlap by `r - 1`. Tiles are emitted channel by channel,
/// row-major over `(x̃, ỹ)`.
pub fn extract_tiles(
    fm: &FeatureMap,
    plan: &WinogradPlan,
    pad: usize,
) -> Result<(TileGrid, Vec<PlacedTile>)> {
    let grid = TileGrid::new(fm.height(), fm.width(), plan, pad)?;
    let (m, l) = (plan.m(), plan.l());
    let mut tiles = Vec::with_capacity(fm.channels() * grid.positions());
    for c in 0..fm.channels() {
        for tx in 0..grid.tiles_x {
            for ty in 0..grid.tiles_y {
                let r0 = (tx * m) as isize - pad as isize;
                let c0 = (ty * m) as isize - pad as isize;
                let data = Matrix::from_fn(l, l, |i, j| {
                    fm.get_padded(c, r0 + i as isize, c0 + j as isize)
                });
                tiles.push(PlacedTile {
                    channel: c,
                    tx,
                    ty,
                    data,
                });
            }
        }
    }
    Ok((grid, tiles))
}

/// One matrix per tile position `(ĩ, ĵ)`, all with the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedBatch {
    l: usize,
    rows: usize,
    cols: usize,
    mats: Vec<ZMortonMatrix>,
}

impl TransformedBatch {
    pub fn new(l: usize, mats: Vec<ZMortonMatrix>) -> Result<Self> {
        if mats.len() != l * l {
            return Err(Error::Shape(format!(
                "a batch for tile side {l} needs {} matrices, got {}",
                l * l,
                mats.len()
            )));
        }
        let (rows, cols) = (mats[0].rows(), mats[0].cols());
        if mats.iter().any(|m| m.rows() != rows || m.cols() != cols) {
            return Err(Error::Shape("batch matrices differ in shape".into()));
        }
        Ok(Self {
            l,
            rows,
            cols,
            mats,
        })
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Matrix for tile position `(ĩ, ĵ)`.
    pub fn at(&self, ti: usize, tj: usize) -> &ZMortonMatrix {
        &self.mats[ti * self.l + tj]
    }

    pub fn matrices(&self) -> &[ZMortonMatrix] {
        &self.mats
    }

    pub fn matrices_mut(&mut self) -> &mut [ZMortonMatrix] {
        &mut self.mats
    }

    pub fn into_matrices(self) -> Vec<ZMortonMatrix> {
        self.mats
    }
}

/// Scatters transformed input tiles into the `l²` matrices `V^(ĩ,ĵ)` of
/// shape `C × P`.
pub fn scatter_to_matrices(
    tiles: &[PlacedTile],
    channels: usize,
    grid: &TileGrid,
    l: usize,
) -> Result<TransformedBatch> {
    let p = grid.positions();
    let mut per_channel = vec![0usize; channels];
    for t in tiles {
        if t.channel >= channels {
            return Err(Error::Shape(format!(
                "tile for channel {} in a {channels}-channel batch",
                t.channel
            )));
        }
        if t.data.rows() != l || t.data.cols() != l {
            return Err(Error::Shape(format!(
                "tile is {}x{}, expected {l}x{l}",
                t.data.rows(),
                t.data.cols()
            )));
        }
        per_channel[t.channel] += 1;
    }
    if let Some((c, n)) = per_channel.iter().enumerate().find(|(_, n)| **n != p) {
        return Err(Error::Shape(format!(
            "channel {c} has {n} tiles, expected {p}"
        )));
    }
    let mut dense = vec![Matrix::zeros(channels, p); l * l];
    for t in tiles {
        let b = grid.collapse(t.tx, t.ty);
        for ti in 0..l {
            for tj in 0..l {
                dense[ti * l + tj].set(t.channel, b, t.data.get(ti, tj));
            }
        }
    }
    TransformedBatch::new(
        l,
        dense
            .iter()
            .map(|d| ZMortonMatrix::from_dense(d, l))
            .collect(),
    )
}

/// Inverse of [`scatter_to_matrices`]: regroups column `b` of every
/// position matrix into per-channel tiles.
pub fn gather_tiles(batch: &TransformedBatch, grid: &TileGrid) -> Vec<PlacedTile> {
    let l = batch.l();
    let mut out = Vec::with_capacity(batch.rows() * batch.cols());
    for c in 0..batch.rows() {
        for b in 0..batch.cols() {
            let (tx, ty) = grid.expand(b);
            let data = Matrix::from_fn(l, l, |ti, tj| batch.at(ti, tj).get(c, b));
            out.push(PlacedTile {
                channel: c,
                tx,
                ty,
                data,
            });
        }
    }
    out
}

/// Transforms every filter kernel and lays the results out as the `l²`
/// matrices `U^(ĩ,ĵ)` of shape `K × C`.
pub fn gather_filters(filters: &FilterBank, plan: &WinogradPlan) -> Result<TransformedBatch> {
    if filters.size() != plan.r() {
        return Err(Error::Shape(format!(
            "filters are {0}x{0}, plan expects {1}x{1}",
            filters.size(),
            plan.r()
        )));
    }
    let l = plan.l();
    let (kn, cn) = (filters.filters(), filters.channels());
    let mut dense = vec![Matrix::zeros(kn, cn); l * l];
    for k in 0..kn {
        for c in 0..cn {
            let u = transform_filter(plan, &filters.kernel(k, c))?;
            for ti in 0..l {
                for tj in 0..l {
                    dense[ti * l + tj].set(k, c, u.get(ti, tj));
                }
            }
        }
    }
    TransformedBatch::new(
        l,
        dense
            .iter()
            .map(|d| ZMortonMatrix::from_dense(d, l))
            .collect(),
    )
}

/// Regroups each `(k, b)` across the `l²` product matrices into one tile,
/// inverse-transforms it once and writes the `m×m` result at tile `b`,
/// clipped to the output extent.
///
/// Returns the output and the number of inverse transforms performed.
pub fn assemble_output(
    batch: &TransformedBatch,
    plan: &WinogradPlan,
    grid: &TileGrid,
    counts: &mut OpCounts,
) -> Result<(FeatureMap, u64)> {
    let (l, m) = (plan.l(), plan.m());
    if batch.l() != l {
        return Err(Error::Shape(format!(
            "batch tile side {} does not match plan side {l}",
            batch.l()
        )));
    }
    if batch.cols() != grid.positions() {
        return Err(Error::Geometry(format!(
            "batch has {} tile columns, grid has {} positions",
            batch.cols(),
            grid.positions()
        )));
    }
    let kn = batch.rows();
    let mut out = FeatureMap::zeros(kn, grid.out_height, grid.out_width);
    let mut inverses = 0u64;
    for k in 0..kn {
        for b in 0..batch.cols() {
            let tile = Matrix::from_fn(l, l, |ti, tj| batch.at(ti, tj).get(k, b));
            let y = inverse_transform_counted(plan, &tile, counts)?;
            inverses += 1;
            let (tx, ty) = grid.expand(b);
            for i in 0..m {
                for j in 0..m {
                    let (oi, oj) = (tx * m + i, ty * m + j);
                    if oi < grid.out_height && oj < grid.out_width {
                        out.set(k, oi, oj, y.get(i, j));
                    }
                }
            }
        }
    }
    Ok((out, inverses))
}
