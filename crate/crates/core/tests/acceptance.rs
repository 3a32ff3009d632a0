//! Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shape_geodesics::analytic::{
    classify_completeness, shrink_translate_grow, sphere_energy, sphere_geodesic_ode, zigzag_horizontal_length,
    ZigzagBase,
};
use shape_geodesics::diagnostics::{
    area_swept_check, discretization_slack, evaluate_frames, sqrt_vol_lipschitz_check, DiagnosticsRecord,
};
use shape_geodesics::geodesics::{
    integrate_horizontal_geodesic, scalar_momentum_rhs_general, scalar_momentum_rhs_p1, Frame, GeodesicState,
    SolverConfig,
};
use shape_geodesics::geometry::{build_geometry, h0_inner, laplace_beltrami};
use shape_geodesics::io::pgm::{letter_a, momentum_from_gray};
use shape_geodesics::operator::gp_inner;
use shape_geodesics::{GeometryCache, Immersion, OperatorParams, ParamGrid, ScalarField, VectorField};

/// Print the verdict outside libtest's capture so it always reaches the log, then assert.
fn verdict(id: u32, title: &str, passed: bool, detail: String) {
    let line = format!(
        "criterion {id:>2} [{}] {title}: {detail}\n",
        if passed { "PASS" } else { "FAIL" }
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(passed, "criterion {id} failed: {detail}");
}

fn bump_state(n: usize) -> GeodesicState {
    let f = Immersion::flat(ParamGrid::square(n).unwrap());
    let a = ScalarField(f.grid().sample(|u, v| u.sin() * v.sin()));
    GeodesicState::from_normal_momentum(f, &a).unwrap()
}

fn solver(params: OperatorParams, dt: f64, t_final: f64, stride: usize) -> SolverConfig {
    SolverConfig {
        stride,
        cfl_check: false,
        ..SolverConfig::new(params, dt, t_final).unwrap()
    }
}

fn bump_records(n: usize, dt: f64, t_final: f64, stride: usize) -> Vec<DiagnosticsRecord> {
    let params = OperatorParams::default();
    let traj = integrate_horizontal_geodesic(&bump_state(n), &solver(params, dt, t_final, stride)).unwrap();
    evaluate_frames(&traj.frames, &params).unwrap()
}

fn random_field(cache: &GeometryCache, rng: &mut ChaCha8Rng) -> VectorField {
    let grid = cache.grid();
    VectorField(
        (0..grid.len())
            .map(|n| {
                if grid.is_boundary_node(n) {
                    Vector3::zeros()
                } else {
                    Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                }
            })
            .collect(),
    )
}

#[test]
fn criterion_01_bump_energy() {
    let target = PI * PI / 12.0;
    let recs = bump_records(100, 0.05, 5.0, 1);
    let e0 = recs[0].energy;
    let initial_err = (e0 / target - 1.0).abs();
    let drift = recs.iter().map(|r| (r.energy / e0 - 1.0).abs()).fold(0.0, f64::max);
    verdict(
        1,
        "bump-geodesic energy",
        initial_err <= 0.01 && drift <= 0.005,
        format!("E(0) = {e0:.8} ({:.3}% from pi^2/12), max drift {:.4}% over {} frames", 100.0 * initial_err, 100.0 * drift, recs.len()),
    );
}

#[test]
fn criterion_02_operator_exactness() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let params = OperatorParams::default();
    let grids: Vec<(&str, Immersion)> = vec![
        (
            "dirichlet wavy graph",
            Immersion::from_fn(ParamGrid::square(17).unwrap(), |u, v| {
                Vector3::new(u, v, 0.3 * (2.0 * u).sin() * v.cos())
            })
            .unwrap(),
        ),
        (
            "periodic torus",
            Immersion::torus(ParamGrid::periodic(16, 12, (0.0, 2.0 * PI), (0.0, 2.0 * PI)).unwrap(), 3.0, 1.0).unwrap(),
        ),
        (
            "dirichlet sphere patch",
            Immersion::sphere_patch(ParamGrid::dirichlet(15, 15, (0.5, 2.3), (0.2, 2.0)).unwrap(), 1.5).unwrap(),
        ),
    ];
    let mut worst_sym: f64 = 0.0;
    let mut worst_pos = f64::INFINITY;
    let mut ok = true;
    for (_, f) in &grids {
        let cache = build_geometry(f).unwrap();
        for _ in 0..200 {
            let h = random_field(&cache, &mut rng);
            let k = random_field(&cache, &mut rng);
            let lh = laplace_beltrami(&cache, &h).unwrap();
            let lk = laplace_beltrami(&cache, &k).unwrap();
            let norms = h0_inner(&cache, &h, &h).unwrap().sqrt() * h0_inner(&cache, &k, &k).unwrap().sqrt();
            let asym = (h0_inner(&cache, &lh, &k).unwrap() - h0_inner(&cache, &h, &lk).unwrap()).abs() / norms;
            let hh = h0_inner(&cache, &h, &h).unwrap();
            let ph = gp_inner(&cache, &params, &h, &h).unwrap();
            worst_sym = worst_sym.max(asym);
            worst_pos = worst_pos.min(ph / hh);
            ok &= asym <= 1e-10 && ph >= hh;
        }
    }
    verdict(
        2,
        "discrete operator exactness",
        ok,
        format!("600 pairs on 3 grids: max relative asymmetry {worst_sym:.2e}, min <Ph,h>/<h,h> = {worst_pos:.4}"),
    );
}

#[test]
fn criterion_03_eigenvalue_convergence() {
    let errs: Vec<f64> = [21, 41, 81]
        .iter()
        .map(|&n| {
            let f = Immersion::flat(ParamGrid::square(n).unwrap());
            let cache = build_geometry(&f).unwrap();
            let phi = VectorField(f.grid().sample(|u, v| Vector3::x() * (u.sin() * v.sin())));
            let lphi = laplace_beltrami(&cache, &phi).unwrap();
            let rq = h0_inner(&cache, &lphi, &phi).unwrap() / h0_inner(&cache, &phi, &phi).unwrap();
            (rq - 2.0).abs()
        })
        .collect();
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    verdict(
        3,
        "eigenvalue convergence",
        orders.iter().all(|&o| o >= 1.9),
        format!("|RQ - 2| = {:?}, observed orders {orders:.3?}", errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>()),
    );
}

fn random_surface(seed: u64, n: usize) -> (Immersion, VectorField) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c: Vec<f64> = (0..8).map(|_| rng.random_range(-0.3..0.3)).collect();
    let grid = ParamGrid::square(n).unwrap();
    let f = Immersion::from_fn(grid, |u, v| {
        Vector3::new(u + c[0] * v.sin(), v + c[1] * u.cos(), c[2] * (u + v).sin() + c[3] * (u * v).cos())
    })
    .unwrap();
    let f_t = VectorField(grid.sample(|u, v| {
        let bump = u.sin() * v.sin();
        Vector3::new(c[4] * bump, c[5] * bump * u.cos(), (1.0 + c[6]) * bump + c[7] * bump * bump)
    }));
    (f, f_t)
}

#[test]
fn criterion_04_rhs_equivalence() {
    let params = OperatorParams::default();
    let diff_norm = |seed: u64, n: usize| {
        let (f, f_t) = random_surface(seed, n);
        let cache = build_geometry(&f).unwrap();
        let a = scalar_momentum_rhs_p1(&cache, &params, &f_t).unwrap();
        let b = scalar_momentum_rhs_general(&cache, &params, &f_t).unwrap();
        let d = VectorField(a.sub(&b).iter().map(|x| Vector3::x() * *x).collect());
        h0_inner(&cache, &d, &d).unwrap().sqrt()
    };
    let ratios: Vec<f64> = (0..20u64).map(|s| diff_norm(1000 + s, 33) / diff_norm(1000 + s, 65)).collect();
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    verdict(
        4,
        "RHS equivalence at p = 1",
        min >= 3.5,
        format!("20 random surfaces, error ratio under h-halving min {min:.3}, mean {:.3}", ratios.iter().sum::<f64>() / 20.0),
    );
}

struct Drifts {
    linear: f64,
    angular: f64,
    reparam: f64,
}

fn drifts(recs: &[DiagnosticsRecord]) -> Drifts {
    let (p0, j0) = (recs[0].linear_momentum, recs[0].angular_momentum);
    Drifts {
        linear: recs.iter().map(|r| (r.linear_momentum - p0).norm()).fold(0.0, f64::max) / p0.norm(),
        angular: recs.iter().map(|r| (r.angular_momentum - j0).norm()).fold(0.0, f64::max) / j0.norm(),
        reparam: recs.iter().map(|r| r.reparam_momentum_norm).fold(0.0, f64::max),
    }
}

#[test]
fn criterion_05_conservation_suite() {
    let n = 41;
    let h = PI / (n - 1) as f64;
    let coarse = drifts(&bump_records(n, 0.1, 5.0, 1));
    let fine = drifts(&bump_records(n, 0.05, 5.0, 2));
    let lin_ratio = coarse.linear / fine.linear;
    let ang_ratio = coarse.angular / fine.angular;
    let shrinks = |r: f64| (8.0..=32.0).contains(&r);
    let passed = fine.linear <= 1e-3
        && fine.angular <= 1e-3
        && fine.reparam <= h * h
        && coarse.reparam <= h * h
        && shrinks(lin_ratio)
        && shrinks(ang_ratio);
    verdict(
        5,
        "conservation suite",
        passed,
        format!(
            "relative drift linear {:.3e}, angular {:.3e} (limit 1e-3); reparam {:.2e} (h^2 = {:.2e}); dt-halving ratios {lin_ratio:.2} and {ang_ratio:.2} (expect ~16)",
            fine.linear,
            fine.angular,
            fine.reparam,
            h * h
        ),
    );
}

#[test]
fn criterion_06_sphere_ode() {
    let mut worst: f64 = 0.0;
    for (a, p) in [(1.0, 1), (1.0, 2), (0.5, 3)] {
        let params = OperatorParams::new(a, p).unwrap();
        let traj = sphere_geodesic_ode(1.0, 0.3, &params, 3, 1e-4, 1.0).unwrap();
        let e0 = sphere_energy(traj.r[0], traj.rt[0], &params, 3);
        for (r, rt) in traj.r.iter().zip(&traj.rt) {
            worst = worst.max((sphere_energy(*r, *rt, &params, 3) / e0 - 1.0).abs());
        }
    }
    let p1 = classify_completeness(3, &OperatorParams::new(1.0, 1).unwrap()).unwrap();
    let p2 = classify_completeness(3, &OperatorParams::new(1.0, 2).unwrap()).unwrap();
    let last = |r: &shape_geodesics::analytic::CompletenessReport| r.lengths.last().unwrap().1 / r.benchmark;
    verdict(
        6,
        "sphere ODE and completeness",
        worst <= 1e-8 && !p1.complete && p2.complete,
        format!(
            "energy drift {worst:.2e}; (n=3, p=1) {} with L/benchmark {:.3}, (n=3, p=2) {} with L/benchmark {:.3e}",
            if p1.complete { "complete" } else { "incomplete" },
            last(&p1),
            if p2.complete { "complete" } else { "incomplete" },
            last(&p2)
        ),
    );
}

#[test]
fn criterion_07_vanishing_distance() {
    let base = ZigzagBase::default_translation();
    let levels = [4u32, 8, 16, 32, 64];
    let lengths: Vec<f64> = levels.iter().map(|&n| zigzag_horizontal_length(&base, n).unwrap()).collect();
    let decreasing = lengths.windows(2).all(|w| w[1] < w[0]);
    let ratio = lengths[4] / lengths[0];
    verdict(
        7,
        "vanishing-distance zig-zag",
        decreasing && ratio < 0.25,
        format!("L(n) for n = {levels:?}: {lengths:.6?}; strictly decreasing {decreasing}; L(64)/L(4) = {ratio:.4} (need < 0.25)"),
    );
}

#[test]
fn criterion_08_frechet_counterexample() {
    let grid = ParamGrid::periodic(32, 32, (0.0, 2.0 * PI), (0.0, 2.0 * PI)).unwrap();
    let torus = Immersion::torus(grid, 3.0, 1.0).unwrap();
    let params = OperatorParams::default();
    let near = shrink_translate_grow(&torus, &params, 1e-3, 1.0).unwrap();
    let far = shrink_translate_grow(&torus, &params, 1e-3, 10.0).unwrap();
    let change = (far.total / near.total - 1.0).abs();
    let grow = far.frechet_displacement / near.frechet_displacement;
    verdict(
        8,
        "Frechet counterexample",
        change < 0.05 && (grow - 10.0).abs() < 1e-12,
        format!("path cost {:.6} -> {:.6} ({:.3}% change), Frechet displacement x{grow}", near.total, far.total, 100.0 * change),
    );
}

fn check_inequalities(name: &str, recs: &[DiagnosticsRecord], h: f64, frame_dt: f64, params: &OperatorParams) -> (bool, String) {
    let slack = discretization_slack(h, frame_dt);
    let area = area_swept_check(recs, slack).unwrap();
    let lip = sqrt_vol_lipschitz_check(recs, params, slack).unwrap();
    (
        area.holds && lip.holds,
        format!("{name}: area margin {:.3e}, Lipschitz margin {:.3e}", area.margin, lip.margin),
    )
}

#[test]
fn criterion_09_inequality_suite() {
    let params = OperatorParams::default();
    let mut all = true;
    let mut details = Vec::new();

    let n = 41;
    let h = PI / (n - 1) as f64;
    let recs = bump_records(n, 0.05, 5.0, 2);
    let (ok, d) = check_inequalities("bump", &recs, h, 0.1, &params);
    all &= ok;
    details.push(d);

    let grid = ParamGrid::square(33).unwrap();
    let f = Immersion::flat(grid);
    let a = momentum_from_gray(&letter_a(128), 1.5, &grid).unwrap();
    let state = GeodesicState::from_normal_momentum(f.clone(), &a).unwrap();
    let traj = integrate_horizontal_geodesic(&state, &solver(params, 0.05, 2.0, 2)).unwrap();
    let recs = evaluate_frames(&traj.frames, &params).unwrap();
    let (ok, d) = check_inequalities("image", &recs, PI / 32.0, 0.1, &params);
    all &= ok;
    details.push(d);

    // pure scaling r·f0 for r from 1 to 2, velocity f0
    let velocity = VectorField(f.points().to_vec());
    let frames: Vec<Frame> = (0..=20)
        .map(|k| {
            let t = k as f64 / 20.0;
            Frame::kinematic(t, f.scaled(1.0 + t), velocity.clone(), &params).unwrap()
        })
        .collect();
    let recs = evaluate_frames(&frames, &params).unwrap();
    let slack = discretization_slack(PI / 32.0, 0.05);
    let area = area_swept_check(&recs, slack).unwrap();
    let lip = sqrt_vol_lipschitz_check(&recs, &params, slack).unwrap();
    let strict = area.lhs < area.rhs && lip.lhs < lip.rhs;
    all &= strict;
    details.push(format!(
        "scaling: area {:.3e} < {:.3e}, sqrt(Vol) change {:.4} < {:.4}",
        area.lhs, area.rhs, lip.lhs, lip.rhs
    ));

    verdict(9, "inequality suite", all, details.join("; "));
}

#[test]
fn criterion_10_reversibility() {
    let params = OperatorParams::default();
    let state0 = bump_state(41);
    let forward = integrate_horizontal_geodesic(&state0, &solver(params, 0.01, 1.0, 100)).unwrap();
    let back_start = forward.final_horizontal_state().unwrap().reversed();
    let backward = integrate_horizontal_geodesic(&back_start, &solver(params, 0.01, 1.0, 100)).unwrap();
    let end = &backward.last().immersion;
    let num: f64 = end.points().iter().zip(state0.f.points()).map(|(a, b)| (a - b).norm_squared()).sum();
    let den: f64 = state0.f.points().iter().map(|p| p.norm_squared()).sum();
    let rel = (num / den).sqrt();
    let mid = forward.last().immersion.points().iter().map(|p| p.z).fold(0.0, f64::max);
    verdict(
        10,
        "reversibility",
        rel <= 1e-5 && (backward.last().t - 2.0).abs() < 1e-12,
        format!("max height at T = 1 is {mid:.4}; relative distance to the start after return {rel:.2e} (limit 1e-5)"),
    );
}
