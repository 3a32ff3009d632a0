use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use shape_geodesics::analytic::{zigzag_horizontal_length, ZigzagBase};
use shape_geodesics::geodesics::{horizontal_derivative, integrate_horizontal_geodesic, GeodesicState, SolverConfig};
use shape_geodesics::geometry::build_geometry;
use shape_geodesics::operator::AssembledOperator;
use shape_geodesics::{Immersion, LinearSolverOptions, OperatorParams, ParamGrid, ScalarField, Vector3, VectorField};

fn bump(n: usize) -> GeodesicState {
    let f = Immersion::flat(ParamGrid::square(n).unwrap());
    let a = ScalarField(f.grid().sample(|u, v| u.sin() * v.sin()));
    GeodesicState::from_normal_momentum(f, &a).unwrap()
}

fn geometry(c: &mut Criterion) {
    let mut g = c.benchmark_group("build_geometry");
    for n in [32, 64, 128] {
        let grid = ParamGrid::periodic(n, n, (0.0, 2.0 * PI), (0.0, 2.0 * PI)).unwrap();
        let torus = Immersion::torus(grid, 3.0, 1.0).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &torus, |b, f| b.iter(|| build_geometry(black_box(f)).unwrap()));
    }
    g.finish();
}

fn operator(c: &mut Criterion) {
    let mut g = c.benchmark_group("assemble_and_solve");
    let params = OperatorParams::default();
    for n in [32, 64, 100] {
        let state = bump(n);
        let cache = build_geometry(&state.f).unwrap();
        let rhs = state.f.grid().sample(|u, v| Vector3::z() * (u.sin() * v.sin()));
        let rhs = VectorField(rhs);
        g.bench_function(BenchmarkId::new("assemble", n), |b| {
            b.iter(|| AssembledOperator::assemble(&cache, &params, &LinearSolverOptions::default()).unwrap())
        });
        let op = AssembledOperator::assemble(&cache, &params, &LinearSolverOptions::default()).unwrap();
        g.bench_function(BenchmarkId::new("solve", n), |b| b.iter(|| op.solve_p(&cache, black_box(&rhs)).unwrap()));
    }
    g.finish();
}

fn rhs(c: &mut Criterion) {
    let params = OperatorParams::default();
    let state = bump(64);
    let linear = LinearSolverOptions::default();
    c.bench_function("horizontal_derivative/64", |b| {
        b.iter(|| horizontal_derivative(&state.f, &state.b, &params, &linear).unwrap())
    });
}

fn integration(c: &mut Criterion) {
    let mut g = c.benchmark_group("integrate_bump");
    g.sample_size(10);
    let state = bump(41);
    let config = SolverConfig {
        cfl_check: false,
        ..SolverConfig::new(OperatorParams::default(), 0.1, 1.0).unwrap()
    };
    g.bench_function("41x41_10_steps", |b| b.iter(|| integrate_horizontal_geodesic(&state, &config).unwrap()));
    g.finish();
}

fn zigzag(c: &mut Criterion) {
    let base = ZigzagBase::default_translation();
    c.bench_function("zigzag_length/16", |b| b.iter(|| zigzag_horizontal_length(&base, black_box(16)).unwrap()));
}

criterion_group!(benches, geometry, operator, rhs, integration, zigzag);
criterion_main!(benches);
