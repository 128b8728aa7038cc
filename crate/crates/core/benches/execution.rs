use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use mediation::bellman::{optimality_report, oracle::SearchSpec, policy_evaluate, solve};
use mediation::bellman::{EvaluateOptions, SolveOptions, UtilityGrid};
use mediation::device::Device;
use mediation::simulate::{simulate, SimConfig};
use mediation::{DerivedQuantities, Execution, RawParams};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn canonical() -> DerivedQuantities {
    DerivedQuantities::derive(&RawParams::CANONICAL.validate().unwrap())
}

fn bench_policy_evaluate(c: &mut Criterion) {
    let dq = canonical();
    let grid = UtilityGrid::for_model(&dq, 2001).unwrap();
    let mut group = c.benchmark_group("policy_evaluate");
    for (name, exec) in MODES {
        let opts = EvaluateOptions {
            exec,
            ..Default::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(name), &opts, |b, opts| {
            b.iter(|| policy_evaluate(&dq, &grid, *opts).unwrap())
        });
    }
    group.finish();
}

fn bench_oracle(c: &mut Criterion) {
    let params = RawParams::CANONICAL.validate().unwrap();
    let sol = solve(
        &params,
        SolveOptions {
            grid_n: 101,
            ..Default::default()
        },
    )
    .unwrap();
    let spec = SearchSpec::uniform(2e-2);
    let mut group = c.benchmark_group("optimality_report");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| optimality_report(&sol.dq, &sol.f, spec, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_simulate(c: &mut Criterion) {
    let params = RawParams::CANONICAL.validate().unwrap();
    let sol = solve(&params, SolveOptions::default()).unwrap();
    let device = Device::new(sol.dq, sol.f).unwrap();
    let mut group = c.benchmark_group("simulate");
    group.sample_size(20);
    for (name, exec) in MODES {
        let cfg = SimConfig {
            exec,
            ..SimConfig::new(device.dq.u_r, 2000, 1).with_horizon(300)
        };
        group.bench_function(name, |b| b.iter(|| simulate(&device, &cfg).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, bench_policy_evaluate, bench_oracle, bench_simulate);
criterion_main!(benches);
