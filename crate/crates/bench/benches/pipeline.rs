use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use pnrqkd::montecarlo::{simulate, EveStrategy, SimConfig};
use pnrqkd::optimize::{max_distance, optimal_mu, sweep, SweepVariable};
use pnrqkd::photon_stats::{DetectorModel, ResolvingPower, SourceModel};
use pnrqkd::{crossover_qber, load_preset, residual_tagged_fraction};

fn analytic(c: &mut Criterion) {
    let mut g = c.benchmark_group("analytic");
    for n in [2u32, 5] {
        g.bench_with_input(BenchmarkId::new("crossover_qber", n), &n, |b, &n| {
            b.iter(|| crossover_qber(black_box(n)).unwrap())
        });
    }
    g.bench_function("residual_tagged_fraction", |b| {
        b.iter(|| residual_tagged_fraction(black_box(0.1), black_box(1e-3), ResolvingPower::Photons(4)).unwrap())
    });
    g.finish();
}

fn optimizer(c: &mut Criterion) {
    let gys = load_preset("gys").unwrap();
    let mut g = c.benchmark_group("optimize");
    g.sample_size(20);
    g.bench_function("optimal_mu_gys_100km", |b| b.iter(|| optimal_mu(&gys, black_box(100.0)).unwrap()));
    g.bench_function("max_distance_gys", |b| b.iter(|| max_distance(&gys, black_box(0.4)).unwrap()));
    g.bench_function("sweep_distance_201", |b| {
        b.iter(|| sweep(&gys, SweepVariable::Distance { mu: 0.4 }, (0.0, 200.0), 201).unwrap())
    });
    g.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let pulses = 1_000_000u64;
    let config = SimConfig {
        source: SourceModel::new(0.5, 1e6).unwrap(),
        eta: 0.1,
        detector: DetectorModel::new(ResolvingPower::Photons(4), 20.0).unwrap(),
        n_pulses: pulses,
        seed: 1,
        eve_strategy: EveStrategy::BeamSplitter,
    };
    let mut g = c.benchmark_group("montecarlo");
    g.sample_size(10);
    g.throughput(Throughput::Elements(pulses));
    g.bench_function("simulate_1e6", |b| b.iter(|| simulate(black_box(&config)).unwrap()));
    g.finish();
}

criterion_group!(benches, analytic, optimizer, monte_carlo);
criterion_main!(benches);
