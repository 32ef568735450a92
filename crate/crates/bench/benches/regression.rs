use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, SamplingMode};
use symquad_bench::fixture;
use symquad_core::regression::AugmentationScheme;
use symquad_core::{so2_quadrature, Cutoff, ReducedSystem};

fn reduce(c: &mut Criterion) {
    let mut group = c.benchmark_group("reduce");
    for (d, k, n) in [(1usize, 6usize, 800usize), (2, 3, 800)] {
        let (basis, data) = fixture(d, k, n);
        group.bench_function(BenchmarkId::new(format!("d{d}"), k), |b| {
            b.iter(|| ReducedSystem::new(&basis, black_box(&data)).unwrap())
        });
    }
    group.finish();
}

fn augment(c: &mut Criterion) {
    let mut group = c.benchmark_group("augmented_solve");
    group.sampling_mode(SamplingMode::Flat);
    group.sample_size(10);
    let (basis, data) = fixture(1, 4, 100);
    let sys = ReducedSystem::new(&basis, &data).unwrap();
    for t in [16usize, 64, 256] {
        let scheme = AugmentationScheme::Random { count: t, seed: 3 };
        group.bench_with_input(BenchmarkId::new("random_d1_k4", t), &scheme, |b, s| {
            b.iter(|| sys.augmented(s, Cutoff::none()).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("random_d1_k4_schur", t), &scheme, |b, s| {
            b.iter(|| sys.augmented_with_diagnostics(s, Cutoff::none()).unwrap())
        });
    }
    let quad = AugmentationScheme::Quadrature(so2_quadrature(7).unwrap());
    let (basis, data) = fixture(1, 6, 800);
    let sys = ReducedSystem::new(&basis, &data).unwrap();
    group.bench_function("quadrature_d1_k6", |b| b.iter(|| sys.augmented(black_box(&quad), Cutoff::none()).unwrap()));
    group.finish();
}

criterion_group!(benches, reduce, augment);
criterion_main!(benches);
