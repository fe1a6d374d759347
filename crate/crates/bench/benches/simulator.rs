use std::hint::black_box;

use asris_bench::fixture;
use asris_core::baseline::random_search;
use asris_core::nn::mlp::{Activation, Mlp};
use asris_core::problem::evaluate_constraints;
use asris_core::rates::rate_report;
use asris_core::rng::rng_from_seed;
use asris_core::{ActionVector, EnvConfig, RisMode, SrEnv};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ndarray::Array2;

fn physics(c: &mut Criterion) {
    let mut group = c.benchmark_group("physics");
    for m in [16, 64, 128] {
        let (sys, ch, dv) = fixture(8, m, 3);
        group.bench_with_input(BenchmarkId::new("rate_report", m), &m, |b, _| {
            b.iter(|| rate_report(black_box(&ch), black_box(&dv), &sys).unwrap())
        });
        let rates = rate_report(&ch, &dv, &sys).unwrap();
        group.bench_with_input(BenchmarkId::new("constraints", m), &m, |b, _| {
            b.iter(|| evaluate_constraints(black_box(&ch), black_box(&dv), &sys, &rates).unwrap())
        });
    }
    group.finish();
}

fn environment(c: &mut Criterion) {
    let (sys, _, _) = fixture(8, 16, 3);
    let mut env = SrEnv::new(
        sys,
        EnvConfig {
            episode_len: usize::MAX,
            ..EnvConfig::default()
        },
    )
    .unwrap();
    env.reset(1).unwrap();
    let a = ActionVector(vec![0.1; env.action_dim()]);
    c.bench_function("env_step", |b| b.iter(|| env.step(black_box(&a)).unwrap()));

    let (sys, ch, _) = fixture(8, 16, 3);
    c.bench_function("random_search_1000", |b| {
        b.iter(|| random_search(&ch, &sys, RisMode::Active, 1000, 7).unwrap())
    });
}

fn network(c: &mut Criterion) {
    let mut rng = rng_from_seed(3);
    let mlp = Mlp::new(&[70, 400, 300, 1], Activation::Identity, &mut rng).unwrap();
    let x = Array2::from_shape_fn((64, 70), |(r, k)| ((r * 70 + k) as f64 * 0.01).sin());
    let up = Array2::from_elem((64, 1), 1.0);
    c.bench_function("mlp_forward_64", |b| {
        b.iter(|| mlp.forward_batch(black_box(x.view())).unwrap())
    });
    let cache = mlp.forward_batch(x.view()).unwrap();
    c.bench_function("mlp_backward_64", |b| {
        b.iter(|| mlp.backward(black_box(&cache), up.view()).unwrap())
    });
}

criterion_group!(benches, physics, environment, network);
criterion_main!(benches);
