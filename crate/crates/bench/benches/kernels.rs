use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fastthresh::sampler::nuts::{transition, Hamiltonian, PhasePoint};
use fastthresh::DiscParams;
use fastthresh_bench::{frisk_model, stop_model};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn distribution(c: &mut Criterion) {
    let d = DiscParams::new(0.05, 1.3).unwrap();
    let ts: Vec<f64> = (1..=99).map(|i| i as f64 / 100.0).collect();
    c.bench_function("ccdf x99", |b| b.iter(|| ts.iter().map(|&t| d.ccdf(black_box(t)).unwrap()).sum::<f64>()));
    c.bench_function("conditional_mean x99", |b| {
        b.iter(|| ts.iter().map(|&t| d.conditional_mean(black_box(t)).unwrap()).sum::<f64>())
    });
}

fn gradients(c: &mut Criterion) {
    let mut g = c.benchmark_group("log_posterior_grad");
    for locations in [10, 77] {
        let (model, truth) = frisk_model(locations);
        let theta = truth.to_unconstrained();
        let mut grad = vec![0.0; theta.len()];
        g.bench_with_input(BenchmarkId::new("frisk", locations), &theta, |b, th| {
            b.iter(|| model.log_posterior_grad(black_box(th), &mut grad))
        });
        let (model, truth) = stop_model(locations);
        let theta = truth.to_unconstrained();
        g.bench_with_input(BenchmarkId::new("stop", locations), &theta, |b, th| {
            b.iter(|| model.log_posterior_grad(black_box(th), &mut grad))
        });
    }
    g.finish();
}

fn nuts(c: &mut Criterion) {
    let (model, truth) = frisk_model(10);
    let ham = Hamiltonian::new(&model, vec![1e-3; truth.to_unconstrained().len()]);
    let start = PhasePoint::new(&model, truth.to_unconstrained());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let eps = ham.find_reasonable_step(&start, 0.1, &mut rng, &mut 0);
    c.bench_function("nuts transition frisk 3x10", |b| b.iter(|| transition(&ham, &start, eps, 10, &mut rng).n_steps));
}

criterion_group!(benches, distribution, gradients, nuts);
criterion_main!(benches);
