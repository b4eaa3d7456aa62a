use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use cmsw_core::calibration::{differential_evolution, simulate_prices, DeSettings, StructuralParams};
use cmsw_core::fixtures::synthetic_base;
use cmsw_core::par::Parallelism;
use cmsw_core::scenario::{run_counterfactual_pair, ResolvedScenario};
use cmsw_core::world::{PolicyEvent, PolicyFlag, PolicySchedule};
use cmsw_core::GlobalConfig;

const MODES: [(&str, Parallelism); 2] = [
    ("sequential", Parallelism::Sequential),
    ("parallel", Parallelism::Parallel),
];

fn population_evaluation(c: &mut Criterion) {
    let base = synthetic_base();
    let config = GlobalConfig::default();
    let eta = vec![0.0; base.years.len()];
    let bounds = [(0.0, 0.2), (0.01, 0.5), (0.0, 0.2), (0.2, 1.5), (0.05, 0.5)];
    let settings = DeSettings {
        population: 16,
        generations: 2,
        ..DeSettings::default()
    };
    let objective = |x: &[f64]| {
        simulate_prices(&base, &config, StructuralParams::from_slice(x), &eta)
            .map(|p| p.iter().flatten().sum::<f64>())
            .unwrap_or(f64::INFINITY)
    };
    let mut group = c.benchmark_group("de_generation");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| differential_evolution(objective, &bounds, &settings, &[], mode).unwrap())
        });
    }
    group.finish();
}

fn counterfactual_pair(c: &mut Criterion) {
    let inputs = cmsw_core::fixtures::synthetic_inputs();
    let config = GlobalConfig::default();
    let scenario = ResolvedScenario {
        policy: PolicySchedule {
            events: vec![PolicyEvent {
                region: 0,
                flag: PolicyFlag::ExportAllowed,
                value: false,
                start: 24,
                end: 35,
            }],
        },
        ..ResolvedScenario::default()
    };
    let mut group = c.benchmark_group("counterfactual_pair");
    group.sample_size(20);
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| run_counterfactual_pair(&inputs, &config, &scenario, mode).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, population_evaluation, counterfactual_pair);
criterion_main!(benches);
