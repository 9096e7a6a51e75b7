use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pqs_depth::eigen::{extremal_eigenpair, EigenOptions};
use pqs_depth::solver::{hamiltonian_matrix, sweep_lambda, GridConfig, LagrangianParams, SolverConfig};
use pqs_depth::{producibility_hull, zeta, CurveSettings, SpinLabel};

fn eigen(c: &mut Criterion) {
    let mut group = c.benchmark_group("ground_state");
    for two_j in [20u32, 100, 400] {
        let j = f64::from(two_j) / 2.0;
        let band = hamiltonian_matrix(SpinLabel::from_two_j(two_j), &LagrangianParams { lambda: 0.4, s_y: 0.9 * j, s_z: 0.0 });
        let opts = EigenOptions::default();
        group.bench_with_input(BenchmarkId::from_parameter(two_j), &band, |b, band| {
            b.iter(|| extremal_eigenpair(band, &opts).unwrap())
        });
    }
    group.finish();
}

fn curves(c: &mut Criterion) {
    let settings = CurveSettings::default();
    let mut group = c.benchmark_group("curves");
    group.sample_size(10);
    group.bench_function("sweep 2J=20", |b| {
        b.iter(|| sweep_lambda(SpinLabel::integer(10), &GridConfig::default(), &SolverConfig::default()).unwrap())
    });
    group.bench_function("zeta J=10", |b| b.iter(|| zeta(SpinLabel::integer(10), &settings).unwrap()));
    group.bench_function("hull k=4 j=1", |b| b.iter(|| producibility_hull(4, SpinLabel::integer(1), &settings).unwrap()));
    group.finish();
}

criterion_group!(benches, eigen, curves);
criterion_main!(benches);
