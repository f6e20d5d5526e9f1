//! Pairwise scans on one worker thread versus the default rayon pool.
//!
//! Build with `--no-default-features` to time the sequential fallback
//! instead; the "pool" variants then run on the calling thread as well.

use std::hint::black_box;

use contractflow::contract::{check_strong, check_uniform};
use contractflow::curve::make_circle_arc;
use contractflow::extend::{check_c, check_cw1, curve_jet};
use contractflow::repar::{verify_m, ReparamPlan};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rayon::ThreadPool;

fn pools() -> Vec<(&'static str, ThreadPool)> {
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let full = rayon::ThreadPoolBuilder::new().build().unwrap();
    vec![("1-thread", single), ("pool", full)]
}

fn contract_scans(c: &mut Criterion) {
    let mut group = c.benchmark_group("contract");
    group.sample_size(10);
    for n in [200usize, 800] {
        let curve = make_circle_arc(std::f64::consts::FRAC_PI_2, n).unwrap();
        for (name, pool) in pools() {
            group.bench_with_input(BenchmarkId::new(format!("strong/{name}"), n), &curve, |b, curve| {
                b.iter(|| pool.install(|| black_box(check_strong(curve))))
            });
            group.bench_with_input(BenchmarkId::new(format!("uniform/{name}"), n), &curve, |b, curve| {
                b.iter(|| pool.install(|| black_box(check_uniform(curve))))
            });
        }
    }
    group.finish();
}

fn plan_and_extension(c: &mut Criterion) {
    let mut group = c.benchmark_group("plan");
    group.sample_size(10);
    for n in [200usize, 400] {
        let curve = make_circle_arc(std::f64::consts::FRAC_PI_2, n).unwrap();
        let plan = ReparamPlan::exponential_with_rate(4.5, curve.length()).unwrap();
        let jet = curve_jet(&curve, &plan);
        for (name, pool) in pools() {
            group.bench_with_input(BenchmarkId::new(format!("verify_m/{name}"), n), &n, |b, _| {
                b.iter(|| pool.install(|| black_box(verify_m(&curve, &plan))))
            });
            group.bench_with_input(BenchmarkId::new(format!("check_c/{name}"), n), &n, |b, _| {
                b.iter(|| pool.install(|| black_box(check_c(&jet))))
            });
            group.bench_with_input(BenchmarkId::new(format!("check_cw1/{name}"), n), &n, |b, _| {
                b.iter(|| pool.install(|| black_box(check_cw1(&jet, 1e-9))))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, contract_scans, plan_and_extension);
criterion_main!(benches);
