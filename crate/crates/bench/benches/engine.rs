use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use dcrb_core::engine::CompiledCircuit;
use dcrb_core::rbproto::{append_block, build_sequence};
use dcrb_core::{
    enumerate_branches, fit_exponential, BlockKind, Circuit, DdMode, DecayCurve, DensityMatrix,
    FitOptions, NoiseConfig, NoiseModel, RbConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rb_config() -> RbConfig {
    RbConfig {
        lengths: vec![0, 60],
        k: 5,
        seeds: 1,
        shots: 1,
        data_qubits: 1,
        connected: true,
        master_seed: 7,
    }
}

/// Sequence construction: 60 Cliffords, 12 blocks, recovery lookup.
fn bench_build_sequence(c: &mut Criterion) {
    let cfg = rb_config();
    let timing = NoiseConfig::default().timing();
    let mut group = c.benchmark_group("build_sequence");
    for kind in [BlockKind::ZC0, BlockKind::HCnot] {
        group.bench_function(format!("{kind}_l60_k5"), |b| {
            b.iter(|| build_sequence(black_box(&cfg), kind, DdMode::None, 1, 0, &timing).unwrap())
        });
    }
    group.finish();
}

/// One sampled shot through a compiled 12-block sequence.
fn bench_run_shot(c: &mut Criterion) {
    let cfg = rb_config();
    let noise = NoiseModel::from_config(&NoiseConfig::default(), 2).unwrap();
    let mut group = c.benchmark_group("run_shot");
    for kind in [BlockKind::ZC0, BlockKind::HCnot] {
        let circuit = build_sequence(&cfg, kind, DdMode::None, 1, 0, &noise.timing).unwrap();
        let compiled = CompiledCircuit::compile(&circuit, &noise).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        group.bench_function(format!("{kind}_l60_k5"), |b| {
            b.iter(|| dcrb_core::run_shot(black_box(&compiled), &mut rng))
        });
    }
    group.finish();
}

/// Exact branch enumeration: cost doubles per measuring block.
fn bench_enumerate(c: &mut Criterion) {
    let noise = NoiseModel::from_config(&NoiseConfig::default(), 2).unwrap();
    let initial = DensityMatrix::basis(2, &[0, 0]).unwrap();
    let mut group = c.benchmark_group("enumerate_branches");
    group.sample_size(30);
    for depth in [4usize, 8] {
        let mut circuit = Circuit::new(2, depth).unwrap();
        for j in 0..depth {
            append_block(
                &mut circuit,
                BlockKind::HCnot,
                DdMode::None,
                &[0],
                1,
                j,
                &noise.timing,
            )
            .unwrap();
        }
        group.bench_function(format!("h_cnot_d{depth}"), |b| {
            b.iter(|| enumerate_branches(black_box(&circuit), &noise, &initial).unwrap())
        });
    }
    group.finish();
}

/// Weighted exponential fit on an 11-point curve.
fn bench_fit(c: &mut Criterion) {
    let x: Vec<f64> = [0u32, 2, 5, 8, 12, 16, 22, 28, 35, 44, 60]
        .iter()
        .map(|&n| f64::from(n))
        .collect();
    let y: Vec<f64> = x.iter().map(|&n| 0.5 * 0.97f64.powf(n) + 0.5).collect();
    let s = vec![1e-3; x.len()];
    let curve = DecayCurve::new(x, y, s).unwrap();
    let opts = FitOptions::default();
    c.bench_function("fit_exponential", |b| {
        b.iter(|| fit_exponential(black_box(&curve), &opts).unwrap())
    });
}

criterion_group!(
    benches,
    bench_build_sequence,
    bench_run_shot,
    bench_enumerate,
    bench_fit
);
criterion_main!(benches);
