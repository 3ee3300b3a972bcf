use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use saddle_core::certificates::{build_certificate, lmi_sweep_with};
use saddle_core::experiments::{gen_equality_qp, gen_logistic_ineq};
use saddle_core::spectral::{eta_sweep_with, log_grid};
use saddle_core::{DynamicsParams, Execution};

fn modes() -> [(&'static str, Execution); 2] {
    [
        ("sequential", Execution::Sequential),
        ("parallel", Execution::Parallel),
    ]
}

fn lmi(c: &mut Criterion) {
    let p = gen_logistic_ineq(7, 10, 8, 100, 0.1).unwrap();
    let params = DynamicsParams { eta: 1.0, rho: 1.0 };
    let cert = build_certificate(&p, params).unwrap();
    let mut g = c.benchmark_group("lmi_sweep");
    g.sample_size(10);
    for (name, exec) in modes() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| lmi_sweep_with(&cert, &p, params, 20, 1, exec).unwrap())
        });
    }
    g.finish();
}

fn eta(c: &mut Criterion) {
    let p = gen_equality_qp(42, 40, 20).unwrap();
    let w = p.objective().as_quadratic().unwrap().matrix().clone();
    let grid = log_grid(1e-3, 1e3, 64).unwrap();
    let mut g = c.benchmark_group("eta_sweep");
    g.sample_size(10);
    for (name, exec) in modes() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| eta_sweep_with(&w, p.a(), &grid, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, lmi, eta);
criterion_main!(benches);
