use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use enrda_core::ot::optimal_permutation;
use enrda_core::{build_cost_matrix, sinkhorn, DiscreteDistribution};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand::rngs::StdRng;

fn clouds(dim: usize, n: usize, seed: u64) -> (DiscreteDistribution, DiscreteDistribution) {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut draw = || DMatrix::from_fn(dim, n, |_, _| rng.random_range(-3.0..3.0));
    (
        DiscreteDistribution::uniform(draw()).unwrap(),
        DiscreteDistribution::uniform(draw()).unwrap(),
    )
}

fn bench_sinkhorn(c: &mut Criterion) {
    let mut group = c.benchmark_group("sinkhorn");
    for n in [16, 64, 100] {
        let (p, q) = clouds(3, n, 1);
        let cost = build_cost_matrix(&p, &q, 2.0).unwrap();
        // Scaling regime and log-domain regime.
        for (name, frac) in [("median_x1", 1.0), ("median_x0.05", 0.05)] {
            let gamma = frac * cost.median();
            group.bench_with_input(BenchmarkId::new(name, n), &gamma, |b, &gamma| {
                b.iter(|| sinkhorn(black_box(&cost), p.weights(), q.weights(), gamma, 1e-8, 10_000).unwrap())
            });
        }
    }
    group.finish();
}

fn bench_assignment(c: &mut Criterion) {
    let mut group = c.benchmark_group("assignment");
    for n in [8, 32, 100] {
        let (p, q) = clouds(2, n, 2);
        let cost = build_cost_matrix(&p, &q, 2.0).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), cost.entries(), |b, c| {
            b.iter(|| optimal_permutation(black_box(c)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_sinkhorn, bench_assignment);
criterion_main!(benches);
