use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wino_core::bcoo::bcoo_encode;
use wino_core::counters::OpCounts;
use wino_core::engine::{block_matmul, recursive_matmul, BlockSparse, LayerSpec};
use wino_core::layout::ZMortonMatrix;
use wino_core::sim::{
    simulate_cluster_dense, simulate_cluster_sparse, simulate_layer, simulate_transform, ArchConfig,
};
use wino_core::transform::make_plan;
use wino_core::Matrix;

fn random(rng: &mut ChaCha8Rng, r: usize, c: usize, zero_blocks: f64) -> ZMortonMatrix {
    let mut z =
        ZMortonMatrix::from_dense(&Matrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0)), 4);
    for a in 0..z.block_count() {
        if rng.gen::<f64>() < zero_blocks {
            z.block_at_mut(a).fill(0.0);
        }
    }
    z
}

#[test]
fn unshared_arrays_need_twice_the_fetches() {
    let cfg = ArchConfig {
        fifo_depth: 0,
        ..ArchConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (u, v) = (random(&mut rng, 32, 32, 0.0), random(&mut rng, 32, 32, 0.0));
    let run = simulate_cluster_dense(&u, &v, &cfg).unwrap();
    for s in &run.steps {
        assert_eq!(s.ops.len(), 4);
        assert_eq!((s.external, s.external + s.local), (4, 8));
    }
    assert_eq!(run.report.bandwidth_reduction_factor(), 2.0);
    let fifo = simulate_cluster_dense(&u, &v, &ArchConfig::default()).unwrap();
    assert!(fifo.report.bandwidth_reduction_factor() >= 2.0);
}

#[test]
fn second_step_fetch_set() {
    let cfg = ArchConfig {
        fifo_depth: 0,
        ..ArchConfig::default()
    };
    let z = ZMortonMatrix::from_dense(&Matrix::from_fn(16, 16, |i, j| (i + j) as f64 + 1.0), 4);
    let run = simulate_cluster_dense(&z, &z, &cfg).unwrap();
    let set = |v: &Vec<usize>| v.iter().copied().collect::<HashSet<_>>();
    assert_eq!(set(&run.steps[1].a_blocks), HashSet::from([1, 9]));
    assert_eq!(set(&run.steps[1].b_blocks), HashSet::from([2, 6]));
}

#[test]
fn sparse_cluster_output_equals_engine() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for zero in [0.0, 0.3, 0.7, 1.0] {
        let u = random(&mut rng, 24, 40, zero);
        let v = random(&mut rng, 40, 20, 0.0);
        let b = bcoo_encode(&u);
        let run = simulate_cluster_sparse(&b, &v, &ArchConfig::default()).unwrap();
        let want = block_matmul(
            &BlockSparse::from_bcoo(&b).unwrap(),
            &v,
            &mut OpCounts::default(),
        )
        .unwrap();
        assert_eq!(run.output, want);
        assert_eq!(run.output, recursive_matmul(&u, &v).unwrap());
        let busy_ok = run
            .report
            .array_busy_cycles
            .iter()
            .all(|b| *b <= run.report.total_cycles);
        assert!(busy_ok);
    }
}

#[test]
fn reports_are_deterministic() {
    let plan = make_plan(2, 3).unwrap();
    let cfg = ArchConfig::default();
    let layer = LayerSpec::new("x", 14, 14, 32, 48);
    let a = simulate_layer(&layer, &plan, &cfg, 0.7).unwrap();
    let b = simulate_layer(&layer, &plan, &cfg, 0.7).unwrap();
    assert_eq!(a, b);
}

#[test]
fn cycles_and_fetches_fall_with_sparsity() {
    let plan = make_plan(2, 3).unwrap();
    let cfg = ArchConfig::default();
    let layer = LayerSpec::new("x", 14, 14, 64, 64);
    let runs: Vec<_> = [0.0, 0.2, 0.4, 0.6, 0.8, 0.9, 1.0]
        .iter()
        .map(|s| simulate_layer(&layer, &plan, &cfg, *s).unwrap())
        .collect();
    for w in runs.windows(2) {
        assert!(w[1].total_cycles <= w[0].total_cycles);
        assert!(w[1].external_block_fetches <= w[0].external_block_fetches);
    }
    assert_eq!(runs.last().unwrap().block_matmuls, 0);
}

#[test]
fn cluster_count_sets_waves() {
    let plan = make_plan(2, 3).unwrap();
    let layer = LayerSpec::new("x", 8, 8, 8, 8);
    let one = simulate_layer(
        &layer,
        &plan,
        &ArchConfig {
            clusters: 16,
            ..ArchConfig::default()
        },
        0.0,
    )
    .unwrap();
    let two = simulate_layer(&layer, &plan, &ArchConfig::default(), 0.0).unwrap();
    // 8x8 input, m=2: 16 positions per channel.
    let transforms = simulate_transform(8 * 16, &ArchConfig::default()).total_cycles * 2;
    // Matmul stage doubles when 16 products share 8 clusters.
    assert_eq!(
        two.total_cycles - transforms,
        2 * (one.total_cycles - transforms)
    );
    assert_eq!(one.multiplications, two.multiplications);
}
