//! `wino` command-line front end: verification suites, single-layer
//! convolution, weight compression, simulation and design-space sweeps.
//!
//! Every command is a plain function over parsed arguments so the test
//! suites can drive it without spawning a process.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wino_core::engine::{vgg16_spec, NetworkSpec};
use wino_core::layout::{FeatureMap, FilterBank};
use wino_core::model::{AddCountVariant, EnergyParams};
use wino_core::sim::ArchConfig;

mod commands;
mod verify;

pub use commands::{cmd_compress, cmd_convolve, cmd_dse, cmd_simulate};
pub use verify::{cmd_verify, VerifyReport};

#[derive(Debug, Parser)]
#[command(name = "wino", version, about = "Sparse Winograd convolution toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the built-in equivalence and round-trip suites.
    Verify(VerifyArgs),
    /// Convolve one layer and write the output tensor.
    Convolve(ConvolveArgs),
    /// Transform, prune and compress a filter bank.
    Compress(CompressArgs),
    /// Simulate every convolution of a network.
    Simulate(SimulateArgs),
    /// Sweep tile sizes and sparsities through the model and simulator.
    Dse(DseArgs),
}

/// `C x H x W` feature-map shape, written `CxHxW`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl std::str::FromStr for Shape {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(['x', 'X']).collect();
        let dims: Vec<usize> = parts
            .iter()
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| format!("bad shape `{s}`: {e}"))?;
        match dims[..] {
            [c, h, w] if c > 0 && h > 0 && w > 0 => Ok(Shape { c, h, w }),
            _ => Err(format!("shape `{s}` must be CxHxW with positive sides")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Direct,
    Dense,
    Sparse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Granularity {
    /// Zero individual entries by magnitude.
    Element,
    /// Zero whole blocks by Frobenius norm.
    Block,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Variant {
    /// Transform additions with the `C·K` factor on both terms.
    Joint,
    /// `C` for the input transform, `K` for the inverse.
    PerOperand,
}

impl From<Variant> for AddCountVariant {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Joint => AddCountVariant::Joint,
            Variant::PerOperand => AddCountVariant::PerOperand,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TileArgs {
    /// Outputs per tile side.
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    /// Filter side.
    #[arg(long, default_value_t = 3)]
    pub r: usize,
}

/// Overrides for the simulated architecture; unset fields keep defaults.
/// `dse` recomputes the issue, fill and pass cycles for each tile size.
#[derive(Debug, Clone, Default, Args)]
pub struct ArchArgs {
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long)]
    pub transform_arrays: Option<usize>,
    /// Circular FIFO capacity in blocks; 0 disables reuse across steps.
    #[arg(long)]
    pub fifo_depth: Option<usize>,
    #[arg(long)]
    pub issue_cycles: Option<u64>,
    #[arg(long)]
    pub pipeline_fill: Option<u64>,
    #[arg(long)]
    pub transform_pass_cycles: Option<u64>,
    #[arg(long)]
    pub decompress_cycles: Option<u64>,
}

impl ArchArgs {
    /// Defaults for an `l`-sided array, then the overrides.
    pub fn build(&self, l: usize, seed: u64) -> ArchConfig {
        let mut cfg = ArchConfig::new(l);
        cfg.seed = seed;
        if let Some(v) = self.clusters {
            cfg.clusters = v;
        }
        if let Some(v) = self.transform_arrays {
            cfg.transform_arrays = v;
        }
        if let Some(v) = self.fifo_depth {
            cfg.fifo_depth = v;
        }
        if let Some(v) = self.issue_cycles {
            cfg.issue_cycles = v;
        }
        if let Some(v) = self.pipeline_fill {
            cfg.pipeline_fill = v;
        }
        if let Some(v) = self.transform_pass_cycles {
            cfg.transform_pass_cycles = v;
        }
        if let Some(v) = self.decompress_cycles {
            cfg.decompress_cycles_per_nonzero = v;
        }
        cfg
    }
}

#[derive(Debug, Clone, Args)]
pub struct EnergyArgs {
    /// External-memory access energy.
    #[arg(long, default_value_t = 200.0)]
    pub e_me: f64,
    /// Local-memory access energy.
    #[arg(long, default_value_t = 6.0)]
    pub e_ml: f64,
    #[arg(long, default_value_t = 2.0)]
    pub e_mul: f64,
    #[arg(long, default_value_t = 1.0)]
    pub e_add: f64,
}

impl EnergyArgs {
    pub fn build(&self) -> EnergyParams {
        EnergyParams {
            e_me: self.e_me,
            e_ml: self.e_ml,
            e_mul: self.e_mul,
            e_add: self.e_add,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Check a single shape instead of the built-in matrix.
    #[arg(long)]
    pub shape: Option<Shape>,
    /// Filter count for `--shape`.
    #[arg(long, default_value_t = 4)]
    pub filters: usize,
    #[arg(long, default_value_t = 1)]
    pub pad: usize,
    #[command(flatten)]
    pub tile: TileArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Corrupt one transformed weight before the Winograd path runs.
    #[arg(long)]
    pub inject_fault: bool,
    /// Relative error allowed between paths.
    #[arg(long, default_value_t = 1e-10)]
    pub tolerance: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ConvolveArgs {
    /// Dense-tensor file holding a `C x H x W` input.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Shape of a seeded synthetic input when `--input` is absent.
    #[arg(long, default_value = "3x8x8")]
    pub shape: Shape,
    /// Dense-tensor file holding `K x C x r x r` filters.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Filter count of synthetic weights.
    #[arg(long, default_value_t = 4)]
    pub filters: usize,
    /// Compressed weight batch for sparse mode; replaces pruning.
    #[arg(long)]
    pub bcoo: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Dense)]
    pub mode: Mode,
    #[command(flatten)]
    pub tile: TileArgs,
    #[arg(long, default_value_t = 1)]
    pub pad: usize,
    /// Stride; only the direct path accepts values other than 1.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Element sparsity applied to the transformed weights in sparse mode.
    #[arg(long, default_value_t = 0.0)]
    pub sparsity: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output dense-tensor file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CompressArgs {
    /// Dense-tensor file holding `K x C x r x r` filters.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Filter count of synthetic weights.
    #[arg(long, default_value_t = 16)]
    pub filters: usize,
    /// Channel count of synthetic weights.
    #[arg(long, default_value_t = 16)]
    pub channels: usize,
    #[command(flatten)]
    pub tile: TileArgs,
    #[arg(long, default_value_t = 0.0)]
    pub sparsity: f64,
    #[arg(long, value_enum, default_value_t = Granularity::Element)]
    pub granularity: Granularity,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output compressed batch file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Network spec file, or `vgg16` for the built-in preset.
    #[arg(long, default_value = "vgg16")]
    pub spec: String,
    #[command(flatten)]
    pub tile: TileArgs,
    /// Weight block sparsities, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub sparsity: Vec<f64>,
    #[command(flatten)]
    pub arch: ArchArgs,
    /// Seed of the synthetic block masks.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DseArgs {
    /// Network spec file, or `vgg16` for the built-in preset.
    #[arg(long, default_value = "vgg16")]
    pub spec: String,
    /// Tile output sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub m: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    pub r: usize,
    /// Weight block sparsities, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub sparsity: Vec<f64>,
    #[arg(long, value_enum, default_value_t = Variant::Joint)]
    pub variant: Variant,
    #[command(flatten)]
    pub arch: ArchArgs,
    #[command(flatten)]
    pub energy: EnergyArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Runs a command; `Ok(false)` means it finished but found a failure.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<bool> {
    match cli.command {
        Command::Verify(a) => Ok(cmd_verify(&a, out)?.failed == 0),
        Command::Convolve(a) => cmd_convolve(&a, out).map(|_| true),
        Command::Compress(a) => cmd_compress(&a, out).map(|_| true),
        Command::Simulate(a) => cmd_simulate(&a, out).map(|_| true),
        Command::Dse(a) => cmd_dse(&a, out).map(|_| true),
    }
}

/// `vgg16` or a TOML network spec path.
pub fn load_spec(spec: &str) -> Result<NetworkSpec> {
    if spec == "vgg16" {
        return Ok(vgg16_spec());
    }
    let text = fs::read_to_string(spec).with_context(|| format!("reading network spec {spec}"))?;
    NetworkSpec::from_toml(&text).with_context(|| format!("parsing network spec {spec}"))
}

/// Uniform values in `[-1, 1]`: the feature map first, then the filters.
pub fn synthetic_layer(
    rng: &mut ChaCha8Rng,
    shape: Shape,
    filters: usize,
    r: usize,
) -> (FeatureMap, FilterBank) {
    let fm = FeatureMap::from_fn(shape.c, shape.h, shape.w, |_, _, _| {
        rng.gen_range(-1.0..=1.0)
    });
    let g = FilterBank::from_fn(filters, shape.c, r, |_, _, _, _| rng.gen_range(-1.0..=1.0));
    (fm, g)
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn check_fraction(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        bail!("{name} {v} is outside [0, 1]");
    }
    Ok(())
}

/// Writes to `path`, or to `out` when no path is given.
fn emit(path: Option<&Path>, bytes: &[u8], out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => out.write_all(bytes).context("writing output"),
    }
}
