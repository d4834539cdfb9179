//! Parallel vs sequential execution of the two batch workloads: gamma
//! sweeps and the multi-start equilibrium search.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use cubic_observer::cli::config::RunSpec;
use cubic_observer::cli::fixtures;
use cubic_observer::design::search_nonzero_equilibria;
use cubic_observer::sweep::sweep_gamma;
use cubic_observer::{Execution, SimConfig};

const MODES: [(&str, Execution); 2] = [
    ("parallel", Execution::Parallel),
    ("sequential", Execution::Sequential),
];

fn gamma_sweep(c: &mut Criterion) {
    let spec = RunSpec::from_json(fixtures::config(1).unwrap()).unwrap();
    let built = spec.build().unwrap();
    let base = spec.observer.cubic_base(&built.system).unwrap();
    let cfg = SimConfig {
        horizon: 2.0,
        ..spec.sim_config(&built.system).unwrap()
    };
    let gammas: Vec<f64> = (0..16).map(|k| 0.25 * k as f64).collect();

    let mut group = c.benchmark_group("sweep_gamma");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new(name, gammas.len()), &exec, |b, &exec| {
            b.iter(|| sweep_gamma(&built.system, &base, black_box(&gammas), &cfg, exec).unwrap())
        });
    }
    group.finish();
}

fn equilibrium_search(c: &mut Criterion) {
    let spec = RunSpec::from_json(fixtures::config(2).unwrap()).unwrap();
    let built = spec.build().unwrap();
    let design = built.observer.design();

    let mut group = c.benchmark_group("equilibrium_search");
    for starts in [100, 1000] {
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, starts), &starts, |b, &starts| {
                b.iter(|| search_nonzero_equilibria(&built.system, design, starts, 0x5EED, exec))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, gamma_sweep, equilibrium_search);
criterion_main!(benches);
