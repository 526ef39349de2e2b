use criterion::{criterion_group, criterion_main, Criterion};
use densiwae::training::wae_mmd_objective;
use densiwae::{Activation, KernelSpec, Mlp, MlpSpec, OutputTransform};
use densiwae_bench::gaussian_cloud;
use std::hint::black_box;

fn forward(c: &mut Criterion) {
    let enc = Mlp::build(MlpSpec::new(vec![3, 64, 64, 2], Activation::Relu, OutputTransform::Identity), 1).unwrap();
    let x = gaussian_cloud(256, 3, 1);
    c.bench_function("mlp_forward/256x3", |b| b.iter(|| enc.forward(black_box(&x)).unwrap()));
}

fn objective(c: &mut Criterion) {
    let enc = Mlp::build(MlpSpec::new(vec![3, 64, 64, 2], Activation::Relu, OutputTransform::Identity), 1).unwrap();
    let dec = Mlp::build(MlpSpec::new(vec![2, 64, 64, 3], Activation::Relu, OutputTransform::Identity), 2).unwrap();
    let x = gaussian_cloud(128, 3, 3);
    let prior = gaussian_cloud(128, 2, 4);
    let k = KernelSpec::gaussian(2f64.sqrt()).unwrap();
    c.bench_function("wae_mmd_objective/128", |b| {
        b.iter(|| wae_mmd_objective(&enc, &dec, black_box(&x), black_box(&prior), &k, 0.2).unwrap())
    });
}

criterion_group!(benches, forward, objective);
criterion_main!(benches);
