use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use sdelab_bench::{draw, spec};
use sdelab_core::estimate::{causal_posterior, smoothed_posterior};
use sdelab_core::quadrature::GaussHermite;
use sdelab_core::simulate::simulate_output;
use sdelab_core::{run_ensemble, NoiseBundle, TimeGrid};

fn simulation(c: &mut Criterion) {
    let (e, x, _) = draw("modulated-bpsk", 1000, 1.0);
    let grid = TimeGrid::new(1.0, 1000).unwrap();
    let noise = NoiseBundle::generate(&grid, 0, 0);
    c.bench_function("simulate_modulated_n1000", |b| b.iter(|| simulate_output(&e.system, &x, black_box(1.0), &noise, &grid)));
    c.bench_function("noise_n1000", |b| b.iter(|| NoiseBundle::generate(&grid, 0, black_box(7))));
}

fn posteriors(c: &mut Criterion) {
    let mut g = c.benchmark_group("posterior");
    for n in [100usize, 400] {
        let (e, _, y) = draw("awgn-bpsk", n, 1.0);
        g.bench_with_input(BenchmarkId::new("bpsk_causal", n), &n, |b, _| b.iter(|| causal_posterior(&e.system, &e.input, &y, 1.0)));
        let (e, _, y) = draw("telegraph-awgn", n, 1.0);
        g.bench_with_input(BenchmarkId::new("telegraph_smoothed", n), &n, |b, _| {
            b.iter(|| smoothed_posterior(&e.system, &e.input, &y, 1.0, n))
        });
    }
    g.finish();
}

fn quadrature(c: &mut Criterion) {
    let mut g = c.benchmark_group("gauss_hermite_rule");
    for n in [64usize, 256, 1024] {
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| b.iter(|| GaussHermite::new(black_box(n))));
    }
    g.finish();
}

fn ensembles(c: &mut Criterion) {
    let mut g = c.benchmark_group("ensemble");
    g.sample_size(10);
    for id in ["awgn-gauss", "awgn-bpsk", "telegraph-awgn"] {
        let s = spec(id, 50, vec![0.5, 1.0, 1.5], 256);
        g.bench_function(id, |b| b.iter(|| run_ensemble(&s).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, simulation, posteriors, quadrature, ensembles);
criterion_main!(benches);
