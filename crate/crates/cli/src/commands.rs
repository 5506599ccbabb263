//! File-producing commands: convolve, compress, simulate and dse.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use rand::Rng;
use wino_core::bcoo::{prune, prune_blocks, SparseBatch};
use wino_core::counters::OpCounts;
use wino_core::engine::{direct_conv, winograd_conv_dense_counted, winograd_conv_sparse_counted};
use wino_core::io::DenseTensor;
use wino_core::layout::{gather_filters, FeatureMap, FilterBank};
use wino_core::model::{dse_sweep, write_dse_csv, DseConfig};
use wino_core::sim::{simulate_layer, write_sim_csv, SimRow};
use wino_core::transform::make_plan;

use crate::{
    check_fraction, emit, load_spec, seeded, CompressArgs, ConvolveArgs, DseArgs, Granularity,
    Mode, SimulateArgs,
};

fn read_tensor(path: &Path) -> Result<DenseTensor> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    DenseTensor::read_from(&mut BufReader::new(f))
        .with_context(|| format!("reading {}", path.display()))
}

fn write_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> wino_core::Result<()>) -> Result<usize> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    std::fs::write(path, &buf).with_context(|| format!("writing {}", path.display()))?;
    Ok(buf.len())
}

fn random_filters(rng: &mut impl Rng, k: usize, c: usize, r: usize) -> FilterBank {
    FilterBank::from_fn(k, c, r, |_, _, _, _| rng.gen_range(-1.0..=1.0))
}

/// Convolves one layer; returns the output and the operation counts.
pub fn cmd_convolve(args: &ConvolveArgs, out: &mut dyn Write) -> Result<(FeatureMap, OpCounts)> {
    let mut rng = seeded(args.seed);
    let fm = match &args.input {
        Some(p) => read_tensor(p)?.into_feature_map()?,
        None => {
            let s = args.shape;
            FeatureMap::from_fn(s.c, s.h, s.w, |_, _, _| rng.gen_range(-1.0..=1.0))
        }
    };
    let g = match &args.weights {
        Some(p) => read_tensor(p)?.into_filter_bank()?,
        None => random_filters(&mut rng, args.filters, fm.channels(), args.tile.r),
    };
    if args.mode != Mode::Direct && args.stride != 1 {
        bail!("Winograd modes need stride 1, got {}", args.stride);
    }
    check_fraction("sparsity", args.sparsity)?;
    let plan = make_plan(args.tile.m, args.tile.r)?;

    let (y, counts, detail) = match args.mode {
        Mode::Direct => {
            let y = direct_conv(&fm, &g, args.stride, args.pad)?;
            let taps = (g.channels() * g.size() * g.size()) as u64;
            let outputs = y.as_slice().len() as u64;
            let counts = OpCounts::new(outputs * taps, outputs * (taps - 1));
            (y, counts, String::new())
        }
        Mode::Dense | Mode::Sparse => {
            let (y, stats) = if args.mode == Mode::Dense {
                winograd_conv_dense_counted(&fm, &g, &plan, args.pad)?
            } else {
                let weights = match &args.bcoo {
                    Some(p) => {
                        let f =
                            File::open(p).with_context(|| format!("opening {}", p.display()))?;
                        SparseBatch::read_from(&mut BufReader::new(f))?
                    }
                    None => {
                        SparseBatch::encode(&prune(&gather_filters(&g, &plan)?, args.sparsity)?)
                    }
                };
                winograd_conv_sparse_counted(&fm, &weights, &plan, args.pad)?
            };
            let detail = format!(
                " input_transform_adds={} inverse_transform_adds={} tiles={}",
                stats.input_transform.adds, stats.inverse_transform.adds, stats.input_tiles
            );
            (y, stats.matmul, detail)
        }
    };
    if let Some(p) = &args.out {
        write_file(p, |b| DenseTensor::from(&y).write_to(b))?;
    }
    writeln!(
        out,
        "convolve mode={} output={}x{}x{} mults={} adds={}{detail}",
        args.mode
            .to_possible_value()
            .expect("no skipped variants")
            .get_name(),
        y.channels(),
        y.height(),
        y.width(),
        counts.mults,
        counts.adds
    )?;
    Ok((y, counts))
}

/// Transforms, prunes and compresses filters into a batch container.
pub fn cmd_compress(args: &CompressArgs, out: &mut dyn Write) -> Result<SparseBatch> {
    check_fraction("sparsity", args.sparsity)?;
    let g = match &args.weights {
        Some(p) => read_tensor(p)?.into_filter_bank()?,
        None => random_filters(
            &mut seeded(args.seed),
            args.filters,
            args.channels,
            args.tile.r,
        ),
    };
    let plan = make_plan(args.tile.m, args.tile.r)?;
    let u = gather_filters(&g, &plan)?;
    let pruned = match args.granularity {
        Granularity::Element => prune(&u, args.sparsity)?,
        Granularity::Block => prune_blocks(&u, args.sparsity)?,
    };
    let enc = SparseBatch::encode(&pruned);
    let bytes = write_file(&args.out, |b| enc.write_to(b))?;
    let l = plan.l();
    let entries = l * l * enc.rows() * enc.cols();
    let (gr, gc) = (enc.rows().div_ceil(l), enc.cols().div_ceil(l));
    writeln!(
        out,
        "compress l={l} matrices={} shape={}x{} nnz={} sparsity={:.4} stored_blocks={} of {} bytes={bytes}",
        l * l,
        enc.rows(),
        enc.cols(),
        enc.nnz(),
        1.0 - enc.nnz() as f64 / entries as f64,
        enc.stored_blocks(),
        l * l * gr * gc
    )?;
    Ok(enc)
}

/// One CSV row per (sparsity, layer), sparsities outermost.
pub fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<Vec<SimRow>> {
    for s in &args.sparsity {
        check_fraction("sparsity", *s)?;
    }
    let net = load_spec(&args.spec)?;
    let plan = make_plan(args.tile.m, args.tile.r)?;
    let cfg = args.arch.build(plan.l(), args.seed);
    let mut rows = Vec::new();
    for &s in &args.sparsity {
        for layer in net.convs() {
            let r = simulate_layer(layer, &plan, &cfg, s)
                .with_context(|| format!("simulating {}", layer.name))?;
            rows.push(SimRow::new(&layer.name, plan.m(), s, &r));
        }
    }
    let mut buf = Vec::new();
    write_sim_csv(&mut buf, &rows)?;
    emit(args.out.as_deref(), &buf, out)?;
    Ok(rows)
}

/// Runs the sweep and writes its CSV; returns the CSV bytes.
pub fn cmd_dse(args: &DseArgs, out: &mut dyn Write) -> Result<Vec<u8>> {
    for s in &args.sparsity {
        check_fraction("sparsity", *s)?;
    }
    let net = load_spec(&args.spec)?;
    let cfg = DseConfig {
        r: args.r,
        m_values: args.m.clone(),
        sparsities: args.sparsity.clone(),
        energy: args.energy.build(),
        // Retiled per m inside the sweep.
        arch: args
            .arch
            .build(args.m.first().map_or(2, |m| m + args.r - 1), args.seed),
        variant: args.variant.into(),
    };
    let rows = dse_sweep(&net, &cfg)?;
    let mut buf = Vec::new();
    write_dse_csv(&mut buf, &rows)?;
    emit(args.out.as_deref(), &buf, out)?;
    Ok(buf)
}
