use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use skewlaw_core::chain::{cn_series, stationarity_residual, walk_hitting_pmf, WalkType};
use skewlaw_core::maps::{hata, mbgi, SystemKind};
use skewlaw_core::montecarlo::{orbit_float, simulate_ensemble, Indicator, RngStream};
use skewlaw_core::numerics::float::{FloatPoint, LazyBits};
use skewlaw_core::numerics::{Backend, Dyadic};
use skewlaw_core::partition::{CellTag, PartitionScheme};
use skewlaw_core::stats::{arcsine_cdf, ks_distance};

fn exact(c: &mut Criterion) {
    let sys = mbgi();
    let scheme = PartitionScheme::for_system(&sys).unwrap();
    c.bench_function("transition_row mbgi Minus(0) K=100", |b| {
        b.iter(|| scheme.transition_row(&sys, black_box(CellTag::Minus(0)), 100).unwrap())
    });
    c.bench_function("stationarity_residual hata K=100", |b| {
        b.iter(|| stationarity_residual(black_box(SystemKind::Hata), 100).unwrap())
    });
    c.bench_function("walk_hitting_pmf two-one k=1 n=400", |b| {
        b.iter(|| walk_hitting_pmf(WalkType::TwoOne, 1, black_box(400)).unwrap())
    });
    c.bench_function("cn_series hata N=400", |b| b.iter(|| cn_series(black_box(SystemKind::Hata), 400).unwrap()));
}

fn monte_carlo(c: &mut Criterion) {
    let sys = hata();
    c.bench_function("orbit_float hata 1e5 steps", |b| {
        b.iter_batched(
            || RngStream::new(7, 0),
            |stream| {
                let mut bits = LazyBits::new(stream.bits());
                let start = FloatPoint::uniform(&Dyadic::zero(), &Dyadic::one(), &mut bits).unwrap();
                orbit_float(&sys, start, &mut stream.coins(&sys.p), &mut bits, 100_000, &[Indicator::AboveHalf]).unwrap()
            },
            BatchSize::SmallInput,
        )
    });
    let mut group = c.benchmark_group("ensemble");
    group.sample_size(10);
    group.bench_function("hata N=1e4 M=200 float", |b| {
        b.iter(|| simulate_ensemble(&sys, 10_000, 200, black_box(3), Indicator::AboveHalf, Backend::Float).unwrap())
    });
    group.finish();
}

fn statistics(c: &mut Criterion) {
    let xs: Vec<f64> = (0..5000).map(|i| (i as f64 + 0.5) / 5000.0).collect();
    c.bench_function("ks_distance arcsine 5000", |b| {
        b.iter(|| ks_distance(black_box(&xs), |u| arcsine_cdf(u).unwrap()).unwrap())
    });
}

criterion_group!(benches, exact, monte_carlo, statistics);
criterion_main!(benches);
