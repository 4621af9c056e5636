use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use faraday_bench::{bump_state, green_with_pulse, system};
use faraday_core::{EvolveConfig, MetricField, Solver, SourceData};

fn d_primal(c: &mut Criterion) {
    let mut group = c.benchmark_group("d_primal");
    for cells in [32, 64, 128] {
        let sys = system(3, 2, cells, MetricField::unit());
        let s = bump_state(&sys);
        group.bench_with_input(BenchmarkId::from_parameter(cells), &s.fe, |b, fe| {
            b.iter(|| sys.grid().d_primal(black_box(fe)).unwrap())
        });
    }
    group.finish();
}

fn hodge(c: &mut Criterion) {
    let mut group = c.benchmark_group("hodge_sigma");
    let metric = MetricField::from_ids("gauss", "linear").unwrap();
    for cells in [32, 64, 128] {
        let sys = system(3, 2, cells, metric);
        let s = bump_state(&sys);
        group.bench_with_input(BenchmarkId::from_parameter(cells), &s.fe, |b, fe| {
            b.iter(|| sys.grid().hodge_sigma(black_box(fe), 0.3, &metric).unwrap())
        });
    }
    group.finish();
}

fn rk4_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("rk4_step");
    for (n, cells) in [(3, 32), (3, 64), (4, 16), (4, 32)] {
        let sys = system(n, 2, cells, MetricField::unit());
        let solver = Solver::new(&sys, EvolveConfig::new(1.0)).unwrap();
        let s = bump_state(&sys);
        let dt = solver.dt_limit();
        let src = SourceData::zero();
        group.bench_with_input(BenchmarkId::new(format!("n{n}"), cells), &s, |b, s| {
            b.iter(|| solver.step(black_box(s), &src, dt).unwrap())
        });
    }
    group.finish();
}

fn spacetime_operator(c: &mut Criterion) {
    let mut group = c.benchmark_group("d_op_history");
    group.sample_size(20);
    for cells in [16, 32] {
        let (g, w) = green_with_pulse(cells);
        group.bench_with_input(BenchmarkId::from_parameter(cells), &w, |b, w| b.iter(|| g.d_op(black_box(w)).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, d_primal, hodge, rk4_step, spacetime_operator);
criterion_main!(benches);
