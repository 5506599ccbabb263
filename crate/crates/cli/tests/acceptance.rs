//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wino_cli::{cmd_dse, Cli, Command};
use wino_core::bcoo::{bcoo_decode, bcoo_encode, prune, BcooMatrix, SparseBatch};
use wino_core::counters::OpCounts;
use wino_core::engine::{
    direct_conv, matmul_trace, vgg16_spec, winograd_conv_dense, winograd_conv_dense_counted,
    winograd_conv_sparse, winograd_conv_transformed, LayerSpec,
};
use wino_core::layout::{gather_filters, FeatureMap, FilterBank, ZMortonMatrix};
use wino_core::model::{
    add_counts, energy, mult_count, stage_table, volumes, weight_dilation, AddCountVariant,
    EnergyParams,
};
use wino_core::sim::{simulate_cluster_dense, simulate_layer, ArchConfig};
use wino_core::transform::{
    direct_correlation_1d, direct_tile_counted, make_plan, winograd_1d_counted,
    winograd_tile_counted,
};
use wino_core::Matrix;

type Check = fn() -> Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn random_layer(
    rng: &mut ChaCha8Rng,
    c: usize,
    h: usize,
    w: usize,
    k: usize,
) -> (FeatureMap, FilterBank) {
    let fm = FeatureMap::from_fn(c, h, w, |_, _, _| rng.gen_range(-1.0..=1.0));
    let g = FilterBank::from_fn(k, c, 3, |_, _, _, _| rng.gen_range(-1.0..=1.0));
    (fm, g)
}

fn oracle_equivalence() -> Result<String, String> {
    let start = Instant::now();
    let plan = make_plan(2, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let cases = 60;
    for i in 0..cases {
        let pad = i % 2;
        // Unpadded 3x3 filters need at least 3 rows and columns.
        let lo = if pad == 0 { 3 } else { 2 };
        let (h, w) = (rng.gen_range(lo..=32), rng.gen_range(lo..=32));
        let (c, k) = (rng.gen_range(1..=16), rng.gen_range(1..=16));
        let (fm, g) = random_layer(&mut rng, c, h, w, k);
        let want = direct_conv(&fm, &g, 1, pad).map_err(|e| e.to_string())?;
        let got = winograd_conv_dense(&fm, &g, &plan, pad).map_err(|e| e.to_string())?;
        let err = got.relative_error(&want);
        worst = worst.max(err);
        ensure(
            err <= 1e-10,
            format!("C={c} K={k} H={h} W={w} pad={pad}: error {err:e}"),
        )?;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, format!("took {secs:.1}s"))?;
    Ok(format!(
        "{cases} geometries, max relative error {worst:.2e}, {secs:.2}s"
    ))
}

fn multiplication_reduction() -> Result<String, String> {
    let plan = make_plan(2, 3).unwrap();
    let [mut w1, mut d1, mut w2, mut d2] = [OpCounts::default(); 4];
    let y =
        winograd_1d_counted(&plan, &[0.5, -1.0, 2.0, 0.25], &[1.0, -2.0, 0.5], &mut w1).unwrap();
    let z = direct_correlation_1d(&[0.5, -1.0, 2.0, 0.25], &[1.0, -2.0, 0.5], 2, &mut d1);
    ensure(
        y.iter().zip(&z).all(|(a, b)| (a - b).abs() < 1e-12),
        "1-D outputs differ",
    )?;
    let tile = Matrix::from_fn(4, 4, |i, j| (i * 4 + j) as f64 - 7.5);
    let filt = Matrix::from_fn(3, 3, |i, j| (i as f64 - j as f64) * 0.5);
    winograd_tile_counted(&plan, &tile, &filt, &mut w2).unwrap();
    direct_tile_counted(&tile, &filt, 2, &mut d2);
    let got = (w1.mults, d1.mults, w2.mults, d2.mults);
    ensure(got == (4, 6, 16, 36), format!("counts {got:?}"))?;
    Ok("1-D 4 vs 6, 2-D tile 16 vs 36".into())
}

fn parameter_table() -> Result<String, String> {
    let want: [(&str, u64, u64); 6] = [
        ("conv1", 12_845_056, 65_536),
        ("conv2", 6_422_528, 262_144),
        ("conv3", 3_211_264, 1_048_576),
        ("conv4", 1_605_632, 4_194_304),
        ("conv5", 401_408, 4_194_304),
        ("conv6", 131_072, 4_194_304),
    ];
    let rows = stage_table(&vgg16_spec(), 2, 3);
    ensure(rows.len() == 6, format!("{} stages", rows.len()))?;
    for (row, (stage, wi, wk)) in rows.iter().zip(want) {
        ensure(
            row.stage == stage && row.d_wi == wi && row.d_wk == wk,
            format!(
                "{}: {} / {}, want {wi} / {wk}",
                row.stage, row.d_wi, row.d_wk
            ),
        )?;
    }
    Ok("12 of 12 cells match".into())
}

fn weight_dilation_ratio() -> Result<String, String> {
    let d = weight_dilation(2, 3);
    let l = LayerSpec::new("x", 14, 14, 512, 512);
    let measured = volumes(&l, 2, 3).d_wk as f64 / (512.0 * 512.0 * 9.0);
    ensure(
        d == 16.0 / 9.0 && measured == d,
        format!("ratio {d}, measured {measured}"),
    )?;
    ensure(format!("{d:.2}") == "1.78", format!("rounds to {d:.2}"))?;
    Ok(format!("l²/r² = {d:.6} (1.78)"))
}

fn schedule_golden() -> Result<String, String> {
    let z = ZMortonMatrix::from_dense(&Matrix::from_fn(16, 16, |i, j| (i + j) as f64), 4);
    let t = matmul_trace(&z, &z).map_err(|e| e.to_string())?;
    let want = [
        "C_0 += A_0·B_0 + A_1·B_2",
        "C_4 += A_0·B_4 + A_1·B_6",
        "C_8 += A_8·B_0 + A_9·B_2",
        "C_12 += A_8·B_4 + A_9·B_6",
    ];
    ensure(
        t.len() >= 4 && t[..4] == want,
        format!("trace begins {:?}", &t[..t.len().min(4)]),
    )?;
    ensure(
        t.iter().any(|s| s == "C_0 += A_4·B_8 + A_5·B_10"),
        "missing C_0 += A_4·B_8 + A_5·B_10",
    )?;
    // Top-left 8x8 corner: same first statement.
    let small = ZMortonMatrix::from_dense(&Matrix::from_fn(8, 8, |i, j| (i * j) as f64), 4);
    let ts = matmul_trace(&small, &small).map_err(|e| e.to_string())?;
    ensure(ts[0] == want[0], format!("8x8 trace begins {}", ts[0]))?;
    Ok(format!("{} statements, first four exact", t.len()))
}

fn bcoo_round_trip() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let sparsities = [0.0, 0.3, 0.7, 0.95, 1.0];
    for i in 0..1000 {
        let s = sparsities[i % 5];
        let (rows, cols, l) = (
            rng.gen_range(1..=40),
            rng.gen_range(1..=40),
            rng.gen_range(1..=6),
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
        b.write_to(&mut buf).map_err(|e| e.to_string())?;
        let back = BcooMatrix::read_from(&mut buf.as_slice()).map_err(|e| e.to_string())?;
        let dz = bcoo_decode(&back).map_err(|e| e.to_string())?;
        let bits_equal = dz
            .raw()
            .iter()
            .zip(z.raw())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        ensure(
            back == b && dz == z && bits_equal,
            format!("case {i} differs"),
        )?;
    }
    let mut z = ZMortonMatrix::zeros(16, 16, 4);
    let (br, bc) = z.coords(5);
    z.set(br * 4, bc * 4, 0.5);
    z.set(br * 4 + 1, bc * 4 + 2, -1.0);
    z.set(br * 4 + 3, bc * 4 + 1, 2.0);
    let b = bcoo_encode(&z);
    ensure(
        b.bn == [5] && b.bi == [0, 3] && b.ai == [0, 1, 3] && b.aj == [0, 2, 1],
        format!(
            "B_5 encodes as BN={:?} BI={:?} AI={:?} AJ={:?}",
            b.bn, b.bi, b.ai, b.aj
        ),
    )?;
    Ok("1000 bit-exact round trips; B_5 gives AI=[0,1,3] AJ=[0,2,1]".into())
}

fn sparse_dense_consistency() -> Result<String, String> {
    let plan = make_plan(2, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let cases = 24;
    for i in 0..cases {
        let (c, k, h) = (
            rng.gen_range(1..=16),
            rng.gen_range(1..=16),
            rng.gen_range(2..=20),
        );
        let (fm, g) = random_layer(&mut rng, c, h, h, k);
        let s = [0.0, 0.3, 0.5, 0.7, 0.9, 0.95][i % 6];
        let enc = SparseBatch::encode(&prune(&gather_filters(&g, &plan).unwrap(), s).unwrap());
        let sparse = winograd_conv_sparse(&fm, &enc, &plan, 1).map_err(|e| e.to_string())?;
        let (dense, _) = winograd_conv_transformed(&fm, &enc.decode().unwrap(), &plan, 1)
            .map_err(|e| e.to_string())?;
        let err = if dense.max_abs() == 0.0 {
            sparse.max_abs()
        } else {
            sparse.relative_error(&dense)
        };
        worst = worst.max(err);
        ensure(err <= 1e-10, format!("case {i} error {err:e}"))?;
    }
    Ok(format!("{cases} cases, max relative error {worst:.2e}"))
}

fn fetch_sharing() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let a = Matrix::from_fn(64, 64, |_, _| rng.gen_range(-1.0..=1.0));
    let b = Matrix::from_fn(64, 49, |_, _| rng.gen_range(-1.0..=1.0));
    let (u, v) = (
        ZMortonMatrix::from_dense(&a, 4),
        ZMortonMatrix::from_dense(&b, 4),
    );
    let no_fifo = ArchConfig {
        fifo_depth: 0,
        ..ArchConfig::default()
    };
    let run = simulate_cluster_dense(&u, &v, &no_fifo).map_err(|e| e.to_string())?;
    for (t, s) in run.steps.iter().enumerate() {
        ensure(
            s.ops.len() == 4 && s.external == 4 && s.external + s.local == 8,
            format!(
                "step {t}: {} external of {}",
                s.external,
                s.external + s.local
            ),
        )?;
    }
    let plan = make_plan(2, 3).unwrap();
    let conv5 = LayerSpec::new("conv5", 14, 14, 512, 512);
    let r =
        simulate_layer(&conv5, &plan, &ArchConfig::default(), 0.0).map_err(|e| e.to_string())?;
    let factor = r.bandwidth_reduction_factor();
    ensure(factor >= 2.0, format!("factor {factor}"))?;
    Ok(format!(
        "{} steps at 4 vs 8; end-to-end factor {factor:.3} with default FIFOs",
        run.steps.len()
    ))
}

fn sparsity_speedup() -> Result<String, String> {
    let plan = make_plan(2, 3).unwrap();
    let cfg = ArchConfig::default();
    let conv5 = LayerSpec::new("conv5", 14, 14, 512, 512);
    let cycles: Vec<u64> = [0.0, 0.6, 0.7, 0.8, 0.9]
        .iter()
        .map(|s| simulate_layer(&conv5, &plan, &cfg, *s).map(|r| r.total_cycles))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let speedup = cycles[0] as f64 / cycles[4] as f64;
    ensure(speedup >= 3.0, format!("speedup {speedup:.2}"))?;
    ensure(
        cycles[1..].windows(2).all(|w| w[1] < w[0]),
        format!("cycles {cycles:?}"),
    )?;
    Ok(format!(
        "cycles {cycles:?}; 0.9 is {speedup:.2}x faster than dense"
    ))
}

fn energy_linearity_and_counts() -> Result<String, String> {
    let plan = make_plan(2, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let base = EnergyParams::default();
    let cases = 24;
    for i in 0..cases {
        let (h, w) = (rng.gen_range(2..=20), rng.gen_range(2..=20));
        let (c, k) = (rng.gen_range(1..=16), rng.gen_range(1..=16));
        let layer = LayerSpec {
            w,
            ..LayerSpec::new("x", h, h, c, k)
        };
        let v = volumes(&layer, 2, 3);
        let a = add_counts(&layer, &plan, AddCountVariant::Joint);
        let m_w = mult_count(&layer, 2, 3);
        let e0 = energy(&layer, &plan, &base).map_err(|e| e.to_string())?;
        let diff = |f: fn(&mut EnergyParams)| {
            let mut p = base;
            f(&mut p);
            energy(&layer, &plan, &p)
                .map(|e| e - e0)
                .map_err(|e| e.to_string())
        };
        let coeffs = (
            diff(|p| p.e_me += 1.0)?,
            diff(|p| p.e_ml += 1.0)?,
            diff(|p| p.e_mul += 1.0)?,
            diff(|p| p.e_add += 1.0)?,
        );
        let want = (
            v.d_wk as f64,
            (v.d_wi + v.d_wo) as f64,
            m_w as f64,
            (a.s_w + a.s_b + a.s_a) as f64,
        );
        ensure(
            coeffs == want,
            format!("case {i}: coefficients {coeffs:?}, counts {want:?}"),
        )?;

        let (fm, g) = random_layer(&mut rng, c, h, w, k);
        let (_, stats) =
            winograd_conv_dense_counted(&fm, &g, &plan, 1).map_err(|e| e.to_string())?;
        let measured = (stats.matmul.mults, stats.matmul.adds);
        ensure(
            measured == (m_w, a.s_w),
            format!(
                "case {i}: counters {measured:?}, formulas {:?}",
                (m_w, a.s_w)
            ),
        )?;
    }
    Ok(format!(
        "{cases} geometries: coefficients equal counts, counters equal M_W and S_W"
    ))
}

const SMALL_NET: &str = r#"
[[layer]]
name = "s1_1"
h = 14
w = 14
c = 32
k = 64
r = 3
pad = 1

[[layer]]
kind = "relu"
name = "s1_relu"

[[layer]]
name = "s1_2"
h = 14
w = 14
c = 64
k = 64
r = 3
pad = 1
"#;

fn dse_determinism() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec = dir.path().join("net.toml");
    std::fs::write(&spec, SMALL_NET).map_err(|e| e.to_string())?;
    let run = |name: &str| -> Result<Vec<u8>, String> {
        let out = dir.path().join(name);
        let cli = Cli::try_parse_from([
            "wino",
            "dse",
            "--spec",
            spec.to_str().unwrap(),
            "--m",
            "2,4",
            "--sparsity",
            "0,0.6,0.9",
            "--seed",
            "3",
            "--out",
            out.to_str().unwrap(),
        ])
        .map_err(|e| e.to_string())?;
        let Command::Dse(args) = cli.command else {
            return Err("parsed a different command".into());
        };
        cmd_dse(&args, &mut Vec::new()).map_err(|e| format!("{e:#}"))?;
        std::fs::read(out).map_err(|e| e.to_string())
    };
    let (a, b) = (run("a.csv")?, run("b.csv")?);
    ensure(a == b, "CSV files differ")?;
    let rows = a.iter().filter(|c| **c == b'\n').count() - 1;
    ensure(rows == 12, format!("{rows} rows"))?;
    Ok(format!(
        "two runs byte-identical ({} bytes, {rows} rows)",
        a.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 11] = [
        ("oracle equivalence", oracle_equivalence),
        ("multiplication reduction", multiplication_reduction),
        ("parameter table", parameter_table),
        ("weight dilation", weight_dilation_ratio),
        ("Z-Morton schedule", schedule_golden),
        ("BCOO round trip", bcoo_round_trip),
        ("sparse/dense consistency", sparse_dense_consistency),
        ("fetch sharing", fetch_sharing),
        ("sparsity speedup", sparsity_speedup),
        ("energy linearity and counts", energy_linearity_and_counts),
        ("DSE determinism", dse_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result =
            catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
