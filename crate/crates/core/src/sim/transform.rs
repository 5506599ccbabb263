//! Transform arrays: the two-pass, matrix-stationary Winograd transform.
//!
//! The constant matrix (`B` for inputs, `A` for outputs) stays resident in
//! the array. Pass one streams `D^T` through it and yields `(D^T·B)^T`;
//! that result re-enters as the new `D^T`, so pass two yields `B^T·D·B`.
//! Entries of the stationary matrix are in `{0, ±1}` and steer each PE to
//! pass, add or subtract, so the arrays never multiply.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::sim::config::ArchConfig;
use crate::sim::report::SimReport;

/// Cycles for one array to push `tiles` tiles through both passes: each
/// pass costs `transform_pass_cycles` for the first tile, and later tiles
/// follow `l` cycles apart.
pub fn transform_cycles(tiles: u64, cfg: &ArchConfig) -> u64 {
    if tiles == 0 {
        0
    } else {
        2 * cfg.transform_pass_cycles + (tiles - 1) * cfg.l as u64
    }
}

/// Timing of `tile_count` tiles spread round-robin over the transform arrays.
pub fn simulate_transform(tile_count: u64, cfg: &ArchConfig) -> SimReport {
    let arrays = cfg.transform_arrays as u64;
    let busy: Vec<u64> = (0..arrays)
        .map(|i| {
            let share = tile_count / arrays + u64::from(i < tile_count % arrays);
            transform_cycles(share, cfg)
        })
        .collect();
    SimReport {
        total_cycles: busy.iter().copied().max().unwrap_or(0),
        array_busy_cycles: busy,
        multiplications: 0,
        ..Default::default()
    }
}

/// `x · s` where every entry of `s` is 0 or ±1, using only additions.
fn stationary_pass(x: &Matrix, s: &Matrix, adds: &mut u64) -> Matrix {
    Matrix::from_fn(x.rows(), s.cols(), |i, j| {
        let mut acc: Option<f64> = None;
        for k in 0..x.cols() {
            let term = match s.get(k, j) {
                1.0 => x.get(i, k),
                -1.0 => -x.get(i, k),
                _ => continue,
            };
            acc = Some(match acc {
                None => term,
                Some(a) => {
                    *adds += 1;
                    a + term
                }
            });
        }
        acc.unwrap_or(0.0)
    })
}

/// Functional model of one transform array.
///
/// `stationary` is the right-hand constant: `B` (`l×l`) for the input
/// transform or `A` (`l×m`) for the inverse. Returns `S^T · D · S` and the
/// additions performed.
pub fn systolic_transform(stationary: &Matrix, d: &Matrix) -> Result<(Matrix, u64)> {
    if stationary
        .as_slice()
        .iter()
        .any(|v| !matches!(*v, 0.0 | 1.0 | -1.0))
    {
        return Err(Error::Config(
            "transform arrays need a stationary matrix with entries in {0, ±1}".into(),
        ));
    }
    if d.rows() != stationary.rows() || d.cols() != stationary.rows() {
        return Err(Error::Shape(format!(
            "tile is {}x{}, array expects {n}x{n}",
            d.rows(),
            d.cols(),
            n = stationary.rows()
        )));
    }
    let mut adds = 0;
    let first = stationary_pass(&d.transpose(), stationary, &mut adds).transpose();
    let second = stationary_pass(&first, stationary, &mut adds);
    Ok((second, adds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::{inverse_transform, make_plan, transform_input_tile};

    #[test]
    fn cost_examples() {
        let cfg = ArchConfig::default();
        assert_eq!(transform_cycles(1, &cfg), 20);
        assert_eq!(transform_cycles(3, &cfg), 28);
        let r = simulate_transform(0, &cfg);
        assert_eq!(r.total_cycles, 0);
        assert!(r.array_busy_cycles.iter().all(|b| *b == 0));
        let r = simulate_transform(1, &cfg);
        assert_eq!((r.total_cycles, r.multiplications), (20, 0));
        assert_eq!(simulate_transform(33, &cfg).total_cycles, 28);
    }

    #[test]
    fn functional_output_matches_transforms() {
        let plan = make_plan(2, 3).unwrap();
        let d = Matrix::from_fn(4, 4, |i, j| ((i * 4 + j) as f64 * 0.7).sin());
        let (v, adds) = systolic_transform(&plan.bt().transpose(), &d).unwrap();
        assert_eq!(v, transform_input_tile(&plan, &d).unwrap());
        assert_eq!(adds, 32);
        let (y, _) = systolic_transform(&plan.at().transpose(), &d).unwrap();
        assert!(y.max_abs_diff(&inverse_transform(&plan, &d).unwrap()) == 0.0);
    }

    #[test]
    fn rejects_multiplying_constants() {
        let plan = make_plan(2, 3).unwrap();
        assert!(systolic_transform(&plan.g().transpose(), &Matrix::zeros(3, 3)).is_err());
    }
}
