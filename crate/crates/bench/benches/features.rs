use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qsgauc_bench::{hyperparams, synthetic};
use qsgauc_core::{feature_map, kernel_exact, sample_frequencies, train, TrainOptions};

fn features(c: &mut Criterion) {
    let x = vec![0.25; 8];
    let mut group = c.benchmark_group("feature_map");
    for count in [64, 256, 1024] {
        let block = sample_frequencies(3, 8, count, 1.0).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(count), &block, |b, block| {
            b.iter(|| feature_map(black_box(&x), block).unwrap())
        });
    }
    group.finish();

    let y = vec![0.75; 8];
    c.bench_function("kernel_exact", |b| {
        b.iter(|| kernel_exact(black_box(&x), black_box(&y), 1.0))
    });
}

// Prediction regenerates every iteration's frequencies, so its cost is linear in T.
fn predict(c: &mut Criterion) {
    let ds = synthetic(100, 2);
    let mut group = c.benchmark_group("predict");
    for iterations in [100, 1000] {
        let (model, _) = train(&ds, &hyperparams(64, iterations), TrainOptions::default()).unwrap();
        let x = ds.unlabeled[0].clone();
        group.bench_with_input(
            BenchmarkId::from_parameter(iterations),
            &model,
            |b, model| b.iter(|| model.predict(black_box(&x)).unwrap()),
        );
    }
    group.finish();
}

criterion_group!(benches, features, predict);
criterion_main!(benches);
