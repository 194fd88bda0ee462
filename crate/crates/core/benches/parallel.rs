//! Seed-level parallelism: the same batch of small solves and metric
//! evaluations, dispatched through rayon and sequentially.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use robustqc::harness::{parse_config, run_cell, Scenario, Solution};
use robustqc::parallel::{map, Execution};

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn solves(c: &mut Criterion) {
    let cfg = parse_config(
        r#"{"scenario": "hadamard", "spec": {"n_knots": 16, "dt": 2.0, "formulation": "indirect"},
            "seeds": [0, 1, 2, 3], "output_dir": "unused"}"#,
    )
    .unwrap();
    let mut group = c.benchmark_group("solve_seeds");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| map(exec, &cfg.seeds, |&s| run_cell(Scenario::Hadamard, &cfg.spec, None, None, s, &cfg.solver, None)))
        });
    }
    group.finish();
}

fn metrics(c: &mut Criterion) {
    let cfg = parse_config(r#"{"scenario": "hadamard", "spec": {"formulation": "indirect"}, "seeds": [0], "output_dir": "unused"}"#).unwrap();
    let sol: Solution = run_cell(Scenario::Hadamard, &cfg.spec, None, None, 0, &cfg.solver, None).solution.unwrap();
    let batch = vec![sol; 8];
    let mut group = c.benchmark_group("cross_evaluate");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| map(exec, &batch, |s| s.recompute_metrics(None).unwrap())));
    }
    group.finish();
}

criterion_group!(benches, solves, metrics);
criterion_main!(benches);
