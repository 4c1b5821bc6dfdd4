//! Criterion benchmarks for the hot paths: branching allocation, mixture
//! density evaluation and GPD log densities.

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use hawkes_pot::dp::LognormalMixture;
use hawkes_pot::evt::{gpd_logpdf, GpdParams};
use hawkes_pot::hawkes::{simulate, HawkesParams, TriggeringKernel};
use hawkes_pot::mcmc::sample_branching;
use hawkes_pot::rng;

fn bench_branching(c: &mut Criterion) {
    let kernel = TriggeringKernel::exponential(1.0).unwrap();
    let p = HawkesParams::new(0.10, 0.55, kernel).unwrap();
    let mut r = rng::derive(1, 0);
    let (times, _) = simulate(&p, 2000.0, &mut r).unwrap();
    c.bench_function("sample_branching_exp", |b| {
        b.iter(|| sample_branching(black_box(&times), &p, &mut r))
    });

    let mixture =
        LognormalMixture::new(vec![0.7, 0.3], vec![-0.3, 1.2], vec![0.35, 0.45]).unwrap();
    let pm = HawkesParams::new(0.10, 0.55, TriggeringKernel::LognormalMixture { mixture })
        .unwrap();
    c.bench_function("sample_branching_mixture", |b| {
        b.iter(|| sample_branching(black_box(&times), &pm, &mut r))
    });
}

fn bench_mixture_density(c: &mut Criterion) {
    let mixture =
        LognormalMixture::new(vec![0.5, 0.3, 0.2], vec![-0.3, 0.4, 1.2], vec![0.35, 0.5, 0.45])
            .unwrap();
    c.bench_function("mixture_density", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for i in 1..=100 {
                acc += mixture.density(black_box(i as f64 * 0.1)).unwrap();
            }
            acc
        })
    });
    c.bench_function("mixture_cdf", |b| b.iter(|| mixture.cdf(black_box(1.5))));
}

fn bench_gpd(c: &mut Criterion) {
    let p = GpdParams::new(1.0, 0.15).unwrap();
    c.bench_function("gpd_logpdf", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for i in 1..=100 {
                acc += gpd_logpdf(black_box(i as f64 * 0.05), &p).unwrap();
            }
            acc
        })
    });
}

criterion_group!(benches, bench_branching, bench_mixture_density, bench_gpd);
criterion_main!(benches);
