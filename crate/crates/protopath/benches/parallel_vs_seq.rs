//! Compares the batched map used by profile computation and sweeps against
//! its always-sequential baseline on two representative workloads:
//! activation extraction over an image batch, and per-layer Spearman
//! similarity over many profile pairs.
//!
//! Run with `cargo bench -p protopath` (parallel, the default) and
//! `cargo bench -p protopath --no-default-features` (sequential fallback)
//! to compare the `map_ordered` numbers; `map_ordered_seq` is the shared
//! baseline.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use ndarray::Array3;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use protopath::adapter::{synthesize_shapes_dataset, train_toy_model, ModelHandle, TrainingConfig};
use protopath::metrics::{path_similarity, Metric};
use protopath::nn::Image;
use protopath::parallel::{map_ordered, map_ordered_seq};

fn toy_model() -> ModelHandle {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synthesize_shapes_dataset(&data, 4, 7).unwrap();
    let config = TrainingConfig {
        epochs: 1,
        ..TrainingConfig::default()
    };
    train_toy_model(&data, &config, &dir.path().join("toy-cnn")).unwrap()
}

fn random_images(n: usize, shape: (usize, usize, usize), seed: u64) -> Vec<Image> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Array3::from_shape_fn(shape, |_| rng.gen::<f32>()))
        .collect()
}

fn bench_activation_batch(c: &mut Criterion) {
    let model = toy_model();
    let images = random_images(32, model.input_shape, 11);
    let mut group = c.benchmark_group("activation_batch_32");
    group.sample_size(10);
    group.bench_function("map_ordered", |b| {
        b.iter_batched(
            || images.clone(),
            |imgs| map_ordered(&imgs, |img| model.forward_with_activations(img).unwrap()),
            BatchSize::LargeInput,
        )
    });
    group.bench_function("map_ordered_seq", |b| {
        b.iter_batched(
            || images.clone(),
            |imgs| map_ordered_seq(&imgs, |img| model.forward_with_activations(img).unwrap()),
            BatchSize::LargeInput,
        )
    });
    group.finish();
}

fn bench_similarity_batch(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let layers = 40;
    let width = 512;
    let profile: Vec<Vec<f32>> = (0..layers)
        .map(|_| (0..width).map(|_| rng.gen::<f32>()).collect())
        .collect();
    let others: Vec<Vec<Vec<f32>>> = (0..64)
        .map(|_| {
            (0..layers)
                .map(|_| (0..width).map(|_| rng.gen::<f32>()).collect())
                .collect()
        })
        .collect();
    let mut group = c.benchmark_group("spearman_batch_64");
    group.bench_function("map_ordered", |b| {
        b.iter(|| {
            map_ordered(&others, |rec| {
                path_similarity(rec, &profile, Metric::Spearman).unwrap()
            })
        })
    });
    group.bench_function("map_ordered_seq", |b| {
        b.iter(|| {
            map_ordered_seq(&others, |rec| {
                path_similarity(rec, &profile, Metric::Spearman).unwrap()
            })
        })
    });
    group.finish();
}

criterion_group! {
    name = benches;
    // plot generation needs a system font discoverable by criterion's
    // backend; keep runs headless-safe
    config = Criterion::default().without_plots();
    targets = bench_activation_batch, bench_similarity_batch
}
criterion_main!(benches);
