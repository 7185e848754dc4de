use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use enrda_core::dynamics::{green_function_field, PointSource, SpectralPropagator};
use enrda_core::{lorenz63_step, AdvectionDiffusionParams, Lorenz63Params};
use nalgebra::Vector3;

fn bench_lorenz(c: &mut Criterion) {
    let p = Lorenz63Params::truth();
    c.bench_function("lorenz63_400_steps", |b| {
        b.iter(|| {
            let mut s = Vector3::new(1.508870, -1.531271, 25.46091);
            for _ in 0..400 {
                s = lorenz63_step(black_box(&s), &p).unwrap();
            }
            s
        })
    });
}

fn bench_spectral(c: &mut Criterion) {
    let grids = [
        ("spectral_step_1d_600", vec![0.8], vec![0.25], vec![60.0]),
        ("spectral_step_2d_100x100", vec![0.08; 2], vec![0.02; 2], vec![10.0; 2]),
    ];
    for (name, velocity, diffusivity, extent) in grids {
        let ndim = velocity.len();
        let p = AdvectionDiffusionParams { velocity, diffusivity, spacing: vec![0.1; ndim], extent, dt: 0.5 };
        let source = PointSource { mass: 1000.0, age: 25.0, position: vec![1.0; ndim] };
        let field = green_function_field(&[source], 0.0, &p).unwrap();
        let prop = SpectralPropagator::new(&p).unwrap();
        c.bench_function(name, |b| {
            b.iter_batched_ref(|| field.values.clone(), |v| prop.step(v), criterion::BatchSize::SmallInput)
        });
    }
}

criterion_group!(benches, bench_lorenz, bench_spectral);
criterion_main!(benches);
