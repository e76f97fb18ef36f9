use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use zap_bench::fixture;
use zap_core::experiment::omp_baseline;
use zap_core::theory::{max_psgn_norm_sq, Mode};
use zap_core::zap::{solve, SolverConfig};
use zap_core::ProjectionOperator;

fn projection(c: &mut Criterion) {
    let mut group = c.benchmark_group("projection_apply");
    for (m, n) in [(80, 200), (250, 1000)] {
        let p = fixture(m, n, 10, 1);
        let proj = ProjectionOperator::build(&p.a).unwrap();
        let v: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut out = vec![0.0; n];
        group.bench_with_input(BenchmarkId::from_parameter(format!("{m}x{n}")), &v, |b, v| {
            b.iter(|| proj.apply_into(black_box(v), &mut out))
        });
    }
    group.finish();
}

fn iterations(c: &mut Criterion) {
    let p = fixture(80, 200, 10, 2);
    let cfg = SolverConfig {
        max_iters: 500,
        plateau_window: 0,
        record_every: 500,
        ..SolverConfig::default()
    };
    c.bench_function("zap_l1_500_steps_80x200", |b| {
        b.iter(|| solve(black_box(&p), &cfg, None).unwrap())
    });
}

fn sign_scan(c: &mut Criterion) {
    let p = fixture(6, 10, 1, 3);
    let proj = ProjectionOperator::build(&p.a).unwrap();
    c.bench_function("max_psgn_exact_n10", |b| {
        b.iter(|| max_psgn_norm_sq(black_box(&proj), Mode::Exact).unwrap())
    });
}

fn greedy(c: &mut Criterion) {
    let p = fixture(80, 200, 10, 4);
    c.bench_function("omp_10_atoms_80x200", |b| {
        b.iter(|| omp_baseline(black_box(&p), 10).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = projection, iterations, sign_scan, greedy
}
criterion_main!(benches);
