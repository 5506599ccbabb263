//! Winograd transform matrices and the per-tile forward/inverse transforms.
//!
//! A plan for `F(m, r)` carries `At` (m×l), `G` (l×r) and `Bt` (l×l) with
//! `l = m + r - 1`, such that for vectors `d` (length l) and `g` (length r)
//!
//! ```text
//! At · [(G·g) ⊙ (Bt·d)] = (y_0 .. y_{m-1}),   y_i = Σ_q d_{i+q} g_q
//! ```
//!
//! i.e. the valid part of a 1-D correlation, computed with only `l`
//! multiplications in the element-wise stage. The 2-D form nests the 1-D
//! one: `Y = At [(G g Gt) ⊙ (Bt d B)] A`.
//!
//! `F(2,3)` uses the well-known matrices verbatim. Other sizes are built by
//! Toom-Cook interpolation at the points `0, 1, -1, 2, -2, ...` plus the
//! point at infinity; the Lagrange denominators are folded into `G` so that
//! `Bt` keeps integer entries.

use crate::counters::OpCounts;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Transform matrices for one `F(m, r)` configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct WinogradPlan {
    m: usize,
    r: usize,
    l: usize,
    at: Matrix,
    g: Matrix,
    bt: Matrix,
}

impl WinogradPlan {
    /// Output tile width.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Filter width.
    pub fn r(&self) -> usize {
        self.r
    }

    /// Input tile width, `m + r - 1`.
    pub fn l(&self) -> usize {
        self.l
    }

    pub fn at(&self) -> &Matrix {
        &self.at
    }

    pub fn g(&self) -> &Matrix {
        &self.g
    }

    pub fn bt(&self) -> &Matrix {
        &self.bt
    }

    /// `nnz(A)`, as used by the inverse-transform addition count.
    pub fn nnz_a(&self) -> usize {
        self.at.nnz()
    }

    /// `nnz(B)`, as used by the input-transform addition count.
    pub fn nnz_b(&self) -> usize {
        self.bt.nnz()
    }

    /// True when every entry of `Bt` is 0 or ±1, so the input transform can
    /// run on adders alone.
    pub fn input_transform_is_additive(&self) -> bool {
        is_additive(&self.bt)
    }

    /// True when every entry of `At` is 0 or ±1.
    pub fn inverse_transform_is_additive(&self) -> bool {
        is_additive(&self.at)
    }
}

fn is_additive(m: &Matrix) -> bool {
    m.as_slice()
        .iter()
        .all(|v| matches!(*v, x if x == 0.0 || x == 1.0 || x == -1.0))
}

/// The `n` finite interpolation points `0, 1, -1, 2, -2, ...`.
pub fn interpolation_points(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i == 0 {
                0.0
            } else {
                let mag = i.div_ceil(2) as f64;
                if i % 2 == 1 {
                    mag
                } else {
                    -mag
                }
            }
        })
        .collect()
}

/// Builds the transform matrices for `F(m, r)`.
pub fn make_plan(m: usize, r: usize) -> Result<WinogradPlan> {
    if m < 2 || r < 2 {
        return Err(Error::InvalidPlan(format!(
            "F({m},{r}): both m and r must be at least 2"
        )));
    }
    let l = m + r - 1;
    if (m, r) == (2, 3) {
        return Ok(WinogradPlan {
            m,
            r,
            l,
            at: Matrix::from_rows(&[&[1.0, 1.0, 1.0, 0.0], &[0.0, 1.0, -1.0, -1.0]]),
            g: Matrix::from_rows(&[
                &[1.0, 0.0, 0.0],
                &[0.5, 0.5, 0.5],
                &[0.5, -0.5, 0.5],
                &[0.0, 0.0, 1.0],
            ]),
            bt: Matrix::from_rows(&[
                &[1.0, 0.0, -1.0, 0.0],
                &[0.0, 1.0, 1.0, 0.0],
                &[0.0, -1.0, 1.0, 0.0],
                &[0.0, 1.0, 0.0, -1.0],
            ]),
        });
    }

    let points = interpolation_points(l - 1);
    let inf = l - 1;

    let mut at = Matrix::zeros(m, l);
    let mut g = Matrix::zeros(l, r);
    let mut bt = Matrix::zeros(l, l);

    for (j, &a) in points.iter().enumerate() {
        for i in 0..m {
            at.set(i, j, a.powi(i as i32));
        }
        let others: Vec<f64> = points
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != j)
            .map(|(_, &p)| p)
            .collect();
        let scale: f64 = others.iter().map(|p| a - p).product();
        for q in 0..r {
            g.set(j, q, a.powi(q as i32) / scale);
        }
        for (i, c) in poly_from_roots(&others).into_iter().enumerate() {
            bt.set(j, i, c);
        }
    }
    at.set(m - 1, inf, 1.0);
    g.set(inf, r - 1, 1.0);
    for (i, c) in poly_from_roots(&points).into_iter().enumerate() {
        bt.set(inf, i, c);
    }

    let plan = WinogradPlan { m, r, l, at, g, bt };
    let residual = basis_residual(&plan);
    if residual.is_nan() || residual > 1e-6 {
        return Err(Error::SingularPlan { m, r, residual });
    }
    Ok(plan)
}

/// Coefficients (lowest degree first) of `Π (x - root)`.
fn poly_from_roots(roots: &[f64]) -> Vec<f64> {
    let mut coeffs = vec![1.0];
    for &root in roots {
        let mut next = vec![0.0; coeffs.len() + 1];
        for (i, c) in coeffs.iter().enumerate() {
            next[i + 1] += c;
            next[i] -= root * c;
        }
        coeffs = next;
    }
    coeffs
}

/// Worst deviation from exact correlation over all basis-vector inputs.
fn basis_residual(plan: &WinogradPlan) -> f64 {
    let mut worst: f64 = 0.0;
    for p in 0..plan.l {
        for q in 0..plan.r {
            let mut d = vec![0.0; plan.l];
            let mut g = vec![0.0; plan.r];
            d[p] = 1.0;
            g[q] = 1.0;
            let y = match winograd_1d(plan, &d, &g) {
                Ok(y) => y,
                Err(_) => return f64::INFINITY,
            };
            for (i, v) in y.iter().enumerate() {
                let expect = if i + q == p { 1.0 } else { 0.0 };
                let err = (v - expect).abs();
                worst = if err.is_nan() {
                    f64::INFINITY
                } else {
                    worst.max(err)
                };
            }
        }
    }
    worst
}

/// `coeffs · x`, treating ±1 coefficients as add/subtract and skipping zeros.
///
/// Each output element costs (terms - 1) additions; coefficients other than
/// ±1 cost one multiplication each.
fn apply_left(coeffs: &Matrix, x: &Matrix, counts: &mut OpCounts) -> Matrix {
    debug_assert_eq!(coeffs.cols(), x.rows());
    let mut out = Matrix::zeros(coeffs.rows(), x.cols());
    for i in 0..coeffs.rows() {
        for j in 0..x.cols() {
            let mut acc = 0.0;
            let mut terms = 0u64;
            for k in 0..coeffs.cols() {
                let c = coeffs.get(i, k);
                if c == 0.0 {
                    continue;
                }
                let v = x.get(k, j);
                let term = if c == 1.0 {
                    v
                } else if c == -1.0 {
                    -v
                } else {
                    counts.mults += 1;
                    c * v
                };
                acc = if terms == 0 { term } else { acc + term };
                terms += 1;
            }
            counts.adds += terms.saturating_sub(1);
            out.set(i, j, acc);
        }
    }
    out
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Shape(format!(
            "{what} has length {got}, expected {want}"
        )));
    }
    Ok(())
}

fn check_square(what: &str, t: &Matrix, side: usize) -> Result<()> {
    if t.rows() != side || t.cols() != side {
        return Err(Error::Shape(format!(
            "{what} is {}x{}, expected {side}x{side}",
            t.rows(),
            t.cols()
        )));
    }
    Ok(())
}

/// 1-D Winograd: `At · [(G·g) ⊙ (Bt·d)]`.
pub fn winograd_1d(plan: &WinogradPlan, d: &[f64], g: &[f64]) -> Result<Vec<f64>> {
    winograd_1d_counted(plan, d, g, &mut OpCounts::default())
}

/// [`winograd_1d`] that tallies the element-wise multiplications (exactly `l`).
pub fn winograd_1d_counted(
    plan: &WinogradPlan,
    d: &[f64],
    g: &[f64],
    counts: &mut OpCounts,
) -> Result<Vec<f64>> {
    check_len("input vector", d.len(), plan.l)?;
    check_len("filter vector", g.len(), plan.r)?;
    let h = plan.g.matvec(g)?;
    let j = plan.bt.matvec(d)?;
    let c: Vec<f64> = h.iter().zip(&j).map(|(a, b)| a * b).collect();
    counts.mults += c.len() as u64;
    plan.at.matvec(&c)
}

/// Valid 1-D correlation producing `m` outputs, counting its `m·r` multiplications.
pub fn direct_correlation_1d(d: &[f64], g: &[f64], m: usize, counts: &mut OpCounts) -> Vec<f64> {
    (0..m)
        .map(|i| {
            g.iter()
                .enumerate()
                .map(|(q, gq)| {
                    counts.mults += 1;
                    d[i + q] * gq
                })
                .sum()
        })
        .collect()
}

/// `Bt · d · B` for an `l×l` input tile.
pub fn transform_input_tile(plan: &WinogradPlan, d: &Matrix) -> Result<Matrix> {
    transform_input_tile_counted(plan, d, &mut OpCounts::default())
}

pub fn transform_input_tile_counted(
    plan: &WinogradPlan,
    d: &Matrix,
    counts: &mut OpCounts,
) -> Result<Matrix> {
    check_square("input tile", d, plan.l)?;
    let half = apply_left(&plan.bt, d, counts);
    Ok(apply_left(&plan.bt, &half.transpose(), counts).transpose())
}

/// `G · g · Gt` for an `r×r` filter.
pub fn transform_filter(plan: &WinogradPlan, g: &Matrix) -> Result<Matrix> {
    check_square("filter", g, plan.r)?;
    plan.g.matmul(g)?.matmul(&plan.g.transpose())
}

/// `At · M · A`, taking an `l×l` tile back to an `m×m` output tile.
pub fn inverse_transform(plan: &WinogradPlan, tile: &Matrix) -> Result<Matrix> {
    inverse_transform_counted(plan, tile, &mut OpCounts::default())
}

pub fn inverse_transform_counted(
    plan: &WinogradPlan,
    tile: &Matrix,
    counts: &mut OpCounts,
) -> Result<Matrix> {
    check_square("transformed tile", tile, plan.l)?;
    let half = apply_left(&plan.at, tile, counts);
    Ok(apply_left(&plan.at, &half.transpose(), counts).transpose())
}

/// Single-tile 2-D Winograd, counting the `l²` element-wise multiplications.
pub fn winograd_tile_counted(
    plan: &WinogradPlan,
    d: &Matrix,
    g: &Matrix,
    counts: &mut OpCounts,
) -> Result<Matrix> {
    let u = transform_filter(plan, g)?;
    let v = transform_input_tile(plan, d)?;
    let prod = u.hadamard(&v)?;
    counts.mults += (plan.l * plan.l) as u64;
    inverse_transform(plan, &prod)
}

/// Valid 2-D correlation of an input tile with an `r×r` filter, producing
/// `m×m` outputs and counting its `m²r²` multiplications.
pub fn direct_tile_counted(d: &Matrix, g: &Matrix, m: usize, counts: &mut OpCounts) -> Matrix {
    let r = g.rows();
    Matrix::from_fn(m, m, |i, j| {
        let mut acc = 0.0;
        for p in 0..r {
            for q in 0..r {
                counts.mults += 1;
                acc += d.get(i + p, j + q) * g.get(p, q);
            }
        }
        acc
    })
}
