use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use kbl_core::fixedpoint::{sample_theta, solve_fixed_point, FixedPointOptions};
use kbl_core::rng::{philox4x32_10, RngStream};
use kbl_core::sim::{run_system, ControlSpec, ParticleSystem, RunOptions};
use kbl_core::variational::{varrep_check, Integrand, VarRepFamily};
use kbl_core::{KillingFunction, TimeGrid};

fn rng(c: &mut Criterion) {
    let mut g = c.benchmark_group("rng");
    g.throughput(Throughput::Elements(1));
    g.bench_function("philox4x32_10", |b| {
        let mut ctr = [0u32; 4];
        b.iter(|| {
            ctr[0] = ctr[0].wrapping_add(1);
            black_box(philox4x32_10(black_box(ctr), [0x1234_5678, 0x9abc_def0]))
        })
    });
    g.bench_function("gaussian", |b| {
        let mut s = RngStream::new(1, 0, 0);
        b.iter(|| black_box(s.next_gaussian()))
    });
    g.finish();
}

fn simulate(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulate");
    g.sample_size(10);
    let grid = TimeGrid::new(1.0, 100).unwrap();
    for (name, zeta) in [
        ("constant", KillingFunction::constant(1.0).unwrap()),
        ("abs", KillingFunction::abs_power(1.0).unwrap()),
    ] {
        for n in [10_000usize, 100_000] {
            let sys = ParticleSystem::new(n, 1, grid, zeta.clone()).unwrap();
            g.throughput(Throughput::Elements((n * grid.steps()) as u64));
            g.bench_with_input(BenchmarkId::new(name, n), &sys, |b, sys| {
                b.iter(|| run_system(sys, &ControlSpec::zero(), 1, 0, RunOptions::default()).unwrap())
            });
        }
    }
    g.finish();
}

fn fixed_point(c: &mut Criterion) {
    let mut g = c.benchmark_group("fixed_point");
    g.sample_size(10);
    let grid = TimeGrid::new(1.0, 100).unwrap();
    let theta = sample_theta(&ControlSpec::zero(), 1, grid, 20_000, 1, 0).unwrap();
    let zeta = KillingFunction::abs_power(1.0).unwrap();
    g.bench_function("sample_theta_20k", |b| {
        b.iter(|| sample_theta(&ControlSpec::zero(), 1, grid, 20_000, 1, 0).unwrap())
    });
    g.bench_function("solve_20k", |b| b.iter(|| solve_fixed_point(&theta, &zeta, &FixedPointOptions::default()).unwrap()));
    g.finish();
}

fn varrep(c: &mut Criterion) {
    let mut g = c.benchmark_group("varrep");
    g.sample_size(10);
    g.bench_function("threshold_alpha1_64", |b| {
        b.iter(|| varrep_check(&Integrand::Threshold { alpha: 1.0 }, 1.0, 64, &VarRepFamily::default()).unwrap())
    });
    g.finish();
}

criterion_group!(benches, rng, simulate, fixed_point, varrep);
criterion_main!(benches);
