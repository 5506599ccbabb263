//! `wino verify`: equivalence and round-trip suites with a per-case report.

use std::io::Write;

use anyhow::Result;
use rand::Rng;
use wino_core::bcoo::{bcoo_decode, bcoo_encode, prune, BcooMatrix, SparseBatch};
use wino_core::engine::{
    direct_conv, recursive_matmul, winograd_conv_sparse, winograd_conv_transformed,
};
use wino_core::layout::{gather_filters, morton_decode, morton_encode, ZMortonMatrix};
use wino_core::transform::{make_plan, WinogradPlan};
use wino_core::Matrix;

use crate::{seeded, synthetic_layer, Shape, VerifyArgs};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VerifyReport {
    pub passed: usize,
    pub failed: usize,
}

struct Suite<'a> {
    out: &'a mut dyn Write,
    report: VerifyReport,
}

impl Suite<'_> {
    fn record(&mut self, ok: bool, what: String) -> Result<()> {
        if ok {
            self.report.passed += 1;
        } else {
            self.report.failed += 1;
        }
        writeln!(self.out, "{} {what}", if ok { "PASS" } else { "FAIL" })?;
        Ok(())
    }
}

// Channel, filter and padding mix including scaled-down VGG-like layers.
const CONV_CASES: [(Shape, usize, usize); 8] = [
    (Shape { c: 1, h: 2, w: 2 }, 1, 1),
    (Shape { c: 1, h: 4, w: 4 }, 1, 0),
    (Shape { c: 3, h: 8, w: 8 }, 4, 1),
    (Shape { c: 8, h: 13, w: 9 }, 6, 0),
    (Shape { c: 5, h: 15, w: 17 }, 3, 1),
    (Shape { c: 3, h: 32, w: 32 }, 8, 1),
    (
        Shape {
            c: 16,
            h: 14,
            w: 14,
        },
        16,
        1,
    ),
    (Shape { c: 32, h: 7, w: 7 }, 32, 1),
];

fn conv_case(
    suite: &mut Suite,
    args: &VerifyArgs,
    plan: &WinogradPlan,
    (shape, k, pad): (Shape, usize, usize),
    seed: u64,
) -> Result<()> {
    let label = format!("{}x{}x{} K={k} pad={pad}", shape.c, shape.h, shape.w);
    let (fm, g) = synthetic_layer(&mut seeded(seed), shape, k, plan.r());
    let want = direct_conv(&fm, &g, 1, pad)?;
    let mut u = gather_filters(&g, plan)?;
    if args.inject_fault {
        u.matrices_mut()[0].block_at_mut(0)[0] += 1.0;
    }
    let (got, _) = winograd_conv_transformed(&fm, &u, plan, pad)?;
    let err = got.relative_error(&want);
    suite.record(
        err <= args.tolerance,
        format!("winograd/direct {label} err={err:.2e}"),
    )?;

    let enc = SparseBatch::encode(&prune(&u, 0.7)?);
    let sparse = winograd_conv_sparse(&fm, &enc, plan, pad)?;
    let (dense, _) = winograd_conv_transformed(&fm, &enc.decode()?, plan, pad)?;
    let err = if dense.max_abs() == 0.0 {
        sparse.max_abs()
    } else {
        sparse.relative_error(&dense)
    };
    suite.record(
        err <= args.tolerance,
        format!("sparse/dense {label} err={err:.2e}"),
    )
}

fn bcoo_cases(suite: &mut Suite, seed: u64) -> Result<()> {
    let mut rng = seeded(seed);
    let mut bad = 0;
    let total = 200;
    for i in 0..total {
        let s = [0.0, 0.3, 0.7, 0.95, 1.0][i % 5];
        let (rows, cols, l) = (
            rng.gen_range(1..24),
            rng.gen_range(1..24),
            rng.gen_range(1..6),
        );
        let d = Matrix::from_fn(rows, cols, |_, _| {
            if rng.gen::<f64>() < s {
                0.0
            } else {
                rng.gen_range(-1.0..=1.0)
            }
        });
        let z = ZMortonMatrix::from_dense(&d, l);
        let b = bcoo_encode(&z);
        let mut buf = Vec::new();
        b.write_to(&mut buf)?;
        let back = BcooMatrix::read_from(&mut buf.as_slice())?;
        if back != b || bcoo_decode(&back)? != z {
            bad += 1;
        }
    }
    suite.record(
        bad == 0,
        format!("bcoo round trip {} of {total}", total - bad),
    )
}

fn morton_cases(suite: &mut Suite, seed: u64) -> Result<()> {
    let mut rng = seeded(seed);
    let mut bad = 0;
    for _ in 0..1000 {
        let (r, c) = (rng.gen_range(0..1u64 << 32), rng.gen_range(0..1u64 << 32));
        let z = morton_encode(r, c)?;
        let mut want = 0u64;
        for bit in 0..32 {
            want |= ((c >> bit) & 1) << (2 * bit) | ((r >> bit) & 1) << (2 * bit + 1);
        }
        if z != want || morton_decode(z) != (r, c) {
            bad += 1;
        }
    }
    suite.record(
        bad == 0,
        format!("morton round trip {} of 1000", 1000 - bad),
    )
}

fn matmul_cases(suite: &mut Suite, seed: u64) -> Result<()> {
    let mut rng = seeded(seed);
    for (m, k, n) in [(16, 16, 16), (24, 40, 12), (64, 64, 64)] {
        let a = Matrix::from_fn(m, k, |_, _| rng.gen_range(-1.0..=1.0));
        let b = Matrix::from_fn(k, n, |_, _| rng.gen_range(-1.0..=1.0));
        let c = recursive_matmul(
            &ZMortonMatrix::from_dense(&a, 4),
            &ZMortonMatrix::from_dense(&b, 4),
        )?;
        let want = a.matmul(&b)?;
        let err = c.to_dense().max_abs_diff(&want) / want.max_abs();
        suite.record(
            err <= 1e-12,
            format!("blocked matmul {m}x{k}x{n} err={err:.2e}"),
        )?;
    }
    Ok(())
}

/// Runs the suites and prints one line per case plus a summary.
pub fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<VerifyReport> {
    let plan = make_plan(args.tile.m, args.tile.r)?;
    let mut suite = Suite {
        out,
        report: VerifyReport::default(),
    };
    match args.shape {
        Some(shape) => conv_case(
            &mut suite,
            args,
            &plan,
            (shape, args.filters, args.pad),
            args.seed,
        )?,
        None => {
            for (i, case) in CONV_CASES.into_iter().enumerate() {
                conv_case(
                    &mut suite,
                    args,
                    &plan,
                    case,
                    args.seed.wrapping_add(i as u64),
                )?;
            }
            bcoo_cases(&mut suite, args.seed)?;
            morton_cases(&mut suite, args.seed)?;
            matmul_cases(&mut suite, args.seed)?;
        }
    }
    let r = suite.report;
    writeln!(
        suite.out,
        "verify: {} passed, {} failed",
        r.passed, r.failed
    )?;
    Ok(r)
}
