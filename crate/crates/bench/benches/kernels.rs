use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qpmkit::expectation::expect;
use qpmkit::hulls::{cstar_hull_membership, HullOptions};
use qpmkit::matkit::{eigh, psd_sqrt, svd, DEFAULT_TOL};
use qpmkit::noise::{random_noise, NoiseOptions};
use qpmkit::random::{ginibre, random_psd, rng_from};
use qpmkit::variance::variance_report;
use qpmkit_bench::{expectation_instance, hull_instance};

fn matrix_kernels(c: &mut Criterion) {
    let mut group = c.benchmark_group("matkit");
    for n in [2usize, 4, 8] {
        let mut rng = rng_from(n as u64);
        let a = random_psd(&mut rng, n, n);
        let g = ginibre(&mut rng, n, n);
        group.bench_with_input(BenchmarkId::new("eigh", n), &a, |b, a| b.iter(|| eigh(black_box(a))));
        group.bench_with_input(BenchmarkId::new("psd_sqrt", n), &a, |b, a| b.iter(|| psd_sqrt(black_box(a), DEFAULT_TOL)));
        group.bench_with_input(BenchmarkId::new("svd", n), &g, |b, g| b.iter(|| svd(black_box(g))));
    }
    group.finish();
}

fn expectation_and_variance(c: &mut Criterion) {
    let mut group = c.benchmark_group("expectation");
    for (d, n) in [(2usize, 3usize), (4, 6)] {
        let (nu, psi) = expectation_instance(d, n, 7);
        let id = format!("d{d}n{n}");
        group.bench_function(BenchmarkId::new("expect", &id), |b| b.iter(|| expect(black_box(&nu), black_box(&psi))));
        group.bench_function(BenchmarkId::new("variance_report", &id), |b| b.iter(|| variance_report(&nu, &psi)));
    }
    group.finish();
}

fn hull_membership(c: &mut Criterion) {
    let mut group = c.benchmark_group("hulls");
    group.sample_size(10);
    for (d, n) in [(2usize, 2usize), (3, 3)] {
        let (target, atoms) = hull_instance(d, n, 11);
        group.bench_function(BenchmarkId::new("membership", format!("d{d}n{n}")), |b| {
            b.iter(|| cstar_hull_membership(&target, &atoms, HullOptions::default()))
        });
    }
    group.finish();
}

fn noise(c: &mut Criterion) {
    let mut group = c.benchmark_group("noise");
    group.sample_size(10);
    let (nu, _) = expectation_instance(2, 3, 13);
    let opts = NoiseOptions { restarts: 4, max_iter: 100, step: 0.1, seed: 1 };
    group.bench_function("random_noise_d2n3", |b| b.iter(|| random_noise(&nu, &opts)));
    group.finish();
}

criterion_group!(benches, matrix_kernels, expectation_and_variance, hull_membership, noise);
criterion_main!(benches);
