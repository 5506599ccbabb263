//! One cluster: four output-stationary arrays fed by shared circular FIFOs.
//!
//! Each array owns one output quadrant and walks its part of the unrolled
//! schedule; the four advance in lockstep, one block product per step.
//! Operands needed by two arrays in the same step are fetched once. Each
//! operand side (weights `U`, features `V`) has a FIFO of `fifo_depth`
//! blocks; a block still resident is reused without an external fetch.
//!
//! With sparse weights only products whose weight block is stored are
//! issued. The arrays stay in lockstep so that surviving operands are still
//! shared; a step is skipped only when none of its four products survives
//! and otherwise arrays without work idle. Newly fetched weight blocks pass
//! through a pipelined decompressor whose latency is
//! `decompress_cycles_per_nonzero` per stored nonzero. A step's fetches may
//! start once the step `fifo_depth` places earlier has finished, so the
//! latency hides behind compute whenever the FIFOs run far enough ahead.

use std::collections::{HashSet, VecDeque};

use crate::bcoo::BcooMatrix;
use crate::counters::OpCounts;
use crate::engine::matmul::{execute_op, schedule, BlockOp, BlockOperand, BlockSparse};
use crate::error::{Error, Result};
use crate::layout::{block_address, block_coords, ZMortonMatrix};
use crate::sim::config::ArchConfig;
use crate::sim::report::SimReport;

/// Operand traffic of one lockstep step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepRecord {
    pub ops: Vec<BlockOp>,
    /// Distinct weight blocks used, as Morton addresses in first-use order.
    pub a_blocks: Vec<usize>,
    pub b_blocks: Vec<usize>,
    pub external: u64,
    pub local: u64,
}

#[derive(Debug, Clone)]
pub struct ClusterRun {
    pub report: SimReport,
    pub output: ZMortonMatrix,
    pub steps: Vec<StepRecord>,
}

struct Fifo {
    capacity: usize,
    order: VecDeque<usize>,
    resident: HashSet<usize>,
}

impl Fifo {
    fn new(capacity: usize) -> Self {
        Self {
            capacity,
            order: VecDeque::with_capacity(capacity),
            resident: HashSet::with_capacity(capacity),
        }
    }

    /// Returns true on a hit; a miss loads the block, evicting the oldest.
    fn access(&mut self, block: usize) -> bool {
        if self.resident.contains(&block) {
            return true;
        }
        if self.capacity > 0 {
            if self.order.len() == self.capacity {
                let old = self.order.pop_front().expect("full FIFO is non-empty");
                self.resident.remove(&old);
            }
            self.order.push_back(block);
            self.resident.insert(block);
        }
        false
    }
}

/// Block-level shape of a product, with the stored nonzeros of each weight
/// block (`None` when absent).
pub(crate) struct Structure<'a> {
    pub mb: usize,
    pub kb: usize,
    pub nb: usize,
    pub weight_nnz: &'a dyn Fn(usize, usize) -> Option<u64>,
    /// Logical multiplications of one product, for the report.
    pub op_mults: &'a dyn Fn(&BlockOp) -> u64,
    pub sparse: bool,
}

pub(crate) struct Timeline {
    pub report: SimReport,
    /// Issued products per step, tagged with their array.
    pub steps: Vec<Vec<(usize, BlockOp)>>,
    pub records: Vec<StepRecord>,
}

pub(crate) fn run_structure(s: &Structure, cfg: &ArchConfig, record: bool) -> Timeline {
    // Dense steps list one product per quadrant, in quadrant order.
    let steps: Vec<Vec<(usize, BlockOp)>> = schedule(s.mb, s.kb, s.nb)
        .steps()
        .into_iter()
        .map(|step| {
            step.into_iter()
                .enumerate()
                .filter(|(_, op)| (s.weight_nnz)(op.a.0, op.a.1).is_some())
                .collect::<Vec<_>>()
        })
        .filter(|step| !step.is_empty())
        .collect();

    let (ag, bg) = ((s.mb, s.kb), (s.kb, s.nb));
    let mut fa = Fifo::new(cfg.fifo_depth);
    let mut fb = Fifo::new(cfg.fifo_depth);
    let mut report = SimReport {
        array_busy_cycles: vec![0; cfg.arrays_per_cluster],
        ..Default::default()
    };
    let mut records = Vec::new();
    let mut latency = Vec::with_capacity(steps.len());
    for step in &steps {
        let mut a_blocks = Vec::new();
        let mut b_blocks = Vec::new();
        for (_, op) in step {
            let a = block_address(op.a.0, op.a.1, ag.0, ag.1);
            let b = block_address(op.b.0, op.b.1, bg.0, bg.1);
            if !a_blocks.contains(&a) {
                a_blocks.push(a);
            }
            if !b_blocks.contains(&b) {
                b_blocks.push(b);
            }
        }
        let mut external = 0u64;
        let mut slowest = 0u64;
        for &a in &a_blocks {
            if !fa.access(a) {
                external += 1;
                let (r, c) = block_coords(a, ag.0, ag.1);
                slowest = slowest.max((s.weight_nnz)(r, c).unwrap_or(0));
            }
        }
        for &b in &b_blocks {
            if !fb.access(b) {
                external += 1;
            }
        }
        let unshared = 2 * step.len() as u64;
        report.external_block_fetches += external;
        report.local_block_fetches += unshared - external;
        report.unshared_fetch_estimate += unshared;
        report.block_matmuls += step.len() as u64;
        report.multiplications += step.iter().map(|(_, o)| (s.op_mults)(o)).sum::<u64>();
        for (array, _) in step {
            report.array_busy_cycles[*array] += cfg.issue_cycles;
        }
        latency.push(if s.sparse {
            slowest * cfg.decompress_cycles_per_nonzero
        } else {
            0
        });
        if record {
            records.push(StepRecord {
                ops: step.iter().map(|(_, o)| *o).collect(),
                a_blocks,
                b_blocks,
                external,
                local: unshared - external,
            });
        }
    }

    let n = steps.len();
    report.steps = n as u64;
    if n > 0 {
        let lookahead = cfg.fifo_depth.max(1);
        let mut c_end = vec![0u64; n];
        for t in 0..n {
            let slot_free = if t >= lookahead {
                c_end[t - lookahead]
            } else {
                0
            };
            let ready = slot_free + latency[t];
            let prev = if t > 0 { c_end[t - 1] } else { 0 };
            c_end[t] = prev.max(ready) + cfg.issue_cycles;
        }
        report.total_cycles = c_end[n - 1] + cfg.pipeline_fill;
        report.decompress_stall_cycles =
            report.total_cycles - (cfg.pipeline_fill + n as u64 * cfg.issue_cycles);
    }
    Timeline {
        report,
        steps,
        records,
    }
}

fn valid(n: usize, block: usize, l: usize) -> u64 {
    n.saturating_sub(block * l).min(l) as u64
}

fn run_functional(
    u: &impl BlockOperand,
    v: &ZMortonMatrix,
    cfg: &ArchConfig,
    sparse: bool,
) -> Result<ClusterRun> {
    cfg.validate()?;
    if u.cols() != v.rows() || u.l() != v.l() {
        return Err(Error::Shape(format!(
            "cannot multiply {}x{} (l={}) by {}x{} (l={})",
            u.rows(),
            u.cols(),
            u.l(),
            v.rows(),
            v.cols(),
            v.l()
        )));
    }
    if u.l() != cfg.l {
        return Err(Error::Config(format!(
            "blocks are {0}x{0}, arrays are {1}x{1}",
            u.l(),
            cfg.l
        )));
    }
    let l = u.l();
    let (mb, kb) = u.grid();
    let nb = v.grid_cols();
    let weight_nnz = |r: usize, c: usize| {
        u.block(r, c)
            .map(|b| b.iter().filter(|x| **x != 0.0).count() as u64)
    };
    let op_mults = |op: &BlockOp| {
        valid(u.rows(), op.a.0, l) * valid(u.cols(), op.a.1, l) * valid(v.cols(), op.b.1, l)
    };
    let s = Structure {
        mb,
        kb,
        nb,
        weight_nnz: &weight_nnz,
        op_mults: &op_mults,
        sparse,
    };
    let t = run_structure(&s, cfg, true);
    let mut output = ZMortonMatrix::zeros(u.rows(), v.cols(), l);
    let mut scratch = OpCounts::default();
    for step in &t.steps {
        for (_, op) in step {
            execute_op(op, u, v, &mut output, &mut scratch);
        }
    }
    Ok(ClusterRun {
        report: t.report,
        output,
        steps: t.records,
    })
}

/// Replays the dense schedule of `U · V` on one cluster.
pub fn simulate_cluster_dense(
    u: &ZMortonMatrix,
    v: &ZMortonMatrix,
    cfg: &ArchConfig,
) -> Result<ClusterRun> {
    run_functional(u, v, cfg, false)
}

/// Replays `U · V` with BCOO weights: only stored weight blocks trigger
/// products, and fetched weight blocks are decompressed.
pub fn simulate_cluster_sparse(
    u: &BcooMatrix,
    v: &ZMortonMatrix,
    cfg: &ArchConfig,
) -> Result<ClusterRun> {
    run_functional(&BlockSparse::from_bcoo(u)?, v, cfg, true)
}
