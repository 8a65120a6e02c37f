//! Batched retrieval and training throughput. Run once with default features
//! and once with `--no-default-features` to compare the rayon and sequential
//! builds; the group name records which one produced the numbers.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use pcam::baselines::{mhn_build, mhn_retrieve_batch};
use pcam::data::{procedural_set, Shape};
use pcam::memory::{denoise_batch, store, RetrievalConfig, TrainConfig};
use pcam::par;
use pcam::pcn::PcnModel;
use pcam::Activation;

fn mode() -> &'static str {
    if par::is_parallel() {
        "rayon"
    } else {
        "sequential"
    }
}

fn retrieval(c: &mut Criterion) {
    let shape = Shape::new(3, 16, 16);
    let set = procedural_set(shape, 64, 1).unwrap();
    let model = PcnModel::init(&[shape.len(), 128, 128], Activation::Relu, 1).unwrap();
    let cfg = RetrievalConfig {
        steps: 20,
        f_iterations: 1,
        ..RetrievalConfig::default()
    };
    let mut group = c.benchmark_group(format!("denoise_{}", mode()));
    group.sample_size(10);
    for n in [16, 64] {
        let q = set.matrix().slice(ndarray::s![.., ..n]).to_owned();
        group.bench_with_input(BenchmarkId::from_parameter(n), &q, |b, q| {
            b.iter(|| denoise_batch(&model, black_box(q.view()), &cfg).unwrap())
        });
    }
    group.finish();

    let mhn = mhn_build(&set, 10.0, 3).unwrap();
    let mut group = c.benchmark_group(format!("mhn_{}", mode()));
    group.sample_size(10);
    group.bench_function("64", |b| {
        b.iter(|| mhn_retrieve_batch(&mhn, black_box(set.matrix().view()), 10, None).unwrap())
    });
    group.finish();
}

fn training(c: &mut Criterion) {
    let shape = Shape::new(3, 16, 16);
    let set = procedural_set(shape, 32, 2).unwrap();
    let cfg = TrainConfig {
        steps: 20,
        max_epochs: 1,
        ..TrainConfig::default()
    };
    let mut group = c.benchmark_group(format!("train_epoch_{}", mode()));
    group.sample_size(10);
    group.bench_function("32", |b| {
        b.iter(|| {
            let mut model = PcnModel::init(&[shape.len(), 128, 128], Activation::Relu, 3).unwrap();
            store(&mut model, black_box(&set), &cfg).unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, retrieval, training);
criterion_main!(benches);
