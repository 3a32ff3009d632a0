//! End-to-end pipelines behind the `run` and `experiment` commands.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::analytic::{
    classify_completeness, shrink_translate_grow, sphere_energy, sphere_geodesic_ode, zigzag_horizontal_length,
    ZigzagBase,
};
use crate::diagnostics::{
    area_swept_check, discretization_slack, sqrt_vol_lipschitz_check, DiagnosticsRecord, InequalityReport,
};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geodesics::{integrate_horizontal_geodesic, GeodesicState, Trajectory};
use crate::geometry::{build_geometry, Immersion};
use crate::grid::ParamGrid;

use super::config::{ImmersionSpec, MomentumSpec, RunConfig, DEFAULT_MOMENTUM};
use super::export::{export_frames, read_obj_vertices, write_table};
use super::expr::MomentumExpr;
use super::pgm::{letter_a, momentum_from_gray, momentum_from_image, write_pgm};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Bump,
    Image,
    Spheres,
    Zigzag,
    FrechetScaling,
    SelfIntersection,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Bump,
        Experiment::Image,
        Experiment::Spheres,
        Experiment::Zigzag,
        Experiment::FrechetScaling,
        Experiment::SelfIntersection,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Bump => "bump",
            Experiment::Image => "image",
            Experiment::Spheres => "spheres",
            Experiment::Zigzag => "zigzag",
            Experiment::FrechetScaling => "frechet-scaling",
            Experiment::SelfIntersection => "selfx",
        }
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
            Error::InvalidParameter(format!("unknown experiment '{s}' (expected one of {})", names.join(", ")))
        })
    }
}

/// One internal check of a pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {}: {}", self.name, self.detail)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutcome {
    pub name: String,
    pub checks: Vec<Check>,
    /// Informational lines that are not pass/fail.
    pub notes: Vec<String>,
    pub artifacts: Vec<PathBuf>,
    pub records: Vec<DiagnosticsRecord>,
}

impl ExperimentOutcome {
    fn new(name: &str) -> Self {
        ExperimentOutcome {
            name: name.to_string(),
            ..Default::default()
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check {
            name: name.to_string(),
            passed,
            detail,
        });
    }

    fn inequality(&mut self, name: &str, r: &InequalityReport) {
        let detail = format!("lhs {:.6e} <= rhs {:.6e} + slack {:.3e} (margin {:.3e})", r.lhs, r.rhs, r.slack, r.margin);
        self.check(name, r.holds, detail);
    }

    /// Human-readable summary, also written as `report.txt`.
    pub fn report(&self) -> String {
        let mut s = format!("experiment {}\n", self.name);
        for c in &self.checks {
            s.push_str(&format!("{c}\n"));
        }
        for n in &self.notes {
            s.push_str(&format!("note: {n}\n"));
        }
        s
    }

    fn write_report(&mut self, dir: &Path) -> Result<()> {
        let path = dir.join("report.txt");
        std::fs::write(&path, self.report()).map_err(|e| Error::io(&path, e))?;
        self.artifacts.push(path);
        Ok(())
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Initial immersion described by the configuration.
pub fn build_immersion(cfg: &RunConfig) -> Result<Immersion> {
    let grid = cfg.grid()?;
    match &cfg.immersion {
        ImmersionSpec::FlatSquare => Ok(Immersion::flat(grid)),
        ImmersionSpec::Torus { major, minor } => Immersion::torus(grid, *major, *minor),
        ImmersionSpec::FromFile(path) => {
            let pts = read_obj_vertices(path)?;
            if pts.len() != grid.len() {
                return Err(Error::format(
                    path,
                    format!("has {} vertices but the grid has {}x{}", pts.len(), cfg.nu, cfg.nv),
                ));
            }
            Immersion::new(grid, pts)
        }
    }
}

/// Initial normal momentum `a₀`; the built-in glyph is saved to `dir` when used.
pub fn build_momentum(cfg: &RunConfig, grid: &ParamGrid, dir: &Path) -> Result<(ScalarField, Vec<PathBuf>)> {
    match &cfg.momentum {
        MomentumSpec::Expression(src) => Ok((MomentumExpr::compile(src)?.sample(grid)?, vec![])),
        MomentumSpec::Image { path: Some(p), sigma } => Ok((momentum_from_image(p, *sigma, grid)?, vec![])),
        MomentumSpec::Image { path: None, sigma } => {
            create_dir(dir)?;
            let glyph = letter_a(128);
            let path = dir.join("momentum.pgm");
            write_pgm(&path, &glyph)?;
            Ok((momentum_from_gray(&glyph, *sigma, grid)?, vec![path]))
        }
    }
}

fn is_default_bump(cfg: &RunConfig) -> bool {
    cfg.immersion == ImmersionSpec::FlatSquare
        && cfg.momentum == MomentumSpec::Expression(DEFAULT_MOMENTUM.to_string())
        && cfg.params.a == 1.0
        && cfg.params.p == 1
}

/// Count triangles whose orientation flipped relative to the first frame.
fn folded_triangles(first: &Immersion, last: &Immersion) -> usize {
    let tris = super::export::triangles(first.grid(), false);
    let normal = |f: &Immersion, t: &[usize; 3]| {
        let p = f.points();
        (p[t[1]] - p[t[0]]).cross(&(p[t[2]] - p[t[0]]))
    };
    tris.iter().filter(|t| normal(first, t).dot(&normal(last, t)) < 0.0).count()
}

/// Horizontal geodesic from the configured immersion and momentum, with diagnostics.
fn geodesic_pipeline(name: &str, cfg: &RunConfig, dir: &Path) -> Result<(ExperimentOutcome, Trajectory)> {
    let mut out = ExperimentOutcome::new(name);
    create_dir(dir)?;
    let f0 = build_immersion(cfg)?;
    let (a0, extra) = build_momentum(cfg, f0.grid(), dir)?;
    out.artifacts.extend(extra);
    let state = GeodesicState::from_normal_momentum(f0, &a0)?;
    let solver = cfg.solver_config()?;
    log::info!("{name}: integrating {} steps on a {}x{} grid", solver.step_count(), cfg.nu, cfg.nv);
    let traj = integrate_horizontal_geodesic(&state, &solver)?;
    let summary = export_frames(&traj.frames, &cfg.params, dir, cfg.write_obj, cfg.write_csv)?;
    out.artifacts.extend(summary.obj_files);
    out.artifacts.extend(summary.csv_file);
    let recs = summary.records;

    let e0 = recs[0].energy;
    let drift = recs.iter().map(|r| (r.energy - e0).abs()).fold(0.0, f64::max) / e0.abs().max(f64::MIN_POSITIVE);
    out.check("energy drift", drift <= 5e-3, format!("max relative drift {drift:.3e} (limit 5e-3)"));

    let g = traj.frames[0].immersion.grid();
    let h = g.hu().max(g.hv());
    let frame_dt = traj.dt * solver.stride as f64;
    let slack = discretization_slack(h, frame_dt);
    out.inequality("area swept bound", &area_swept_check(&recs, slack)?);
    if cfg.params.a >= 1.0 && cfg.params.p == 1 {
        out.inequality("sqrt(Vol) Lipschitz bound", &sqrt_vol_lipschitz_check(&recs, &cfg.params, slack)?);
    }

    let lin0 = recs[0].linear_momentum;
    let ang0 = recs[0].angular_momentum;
    let lin_drift = recs.iter().map(|r| (r.linear_momentum - lin0).norm()).fold(0.0, f64::max);
    let ang_drift = recs.iter().map(|r| (r.angular_momentum - ang0).norm()).fold(0.0, f64::max);
    let reparam = recs.iter().map(|r| r.reparam_momentum_norm).fold(0.0, f64::max);
    out.notes.push(format!("initial energy {e0}"));
    out.notes.push(format!("linear momentum drift {lin_drift:.3e} (|P0| = {:.6e})", lin0.norm()));
    out.notes.push(format!("angular momentum drift {ang_drift:.3e} (|J0| = {:.6e})", ang0.norm()));
    out.notes.push(format!("max reparametrization momentum norm {reparam:.3e} (h^2 = {:.3e})", h * h));
    out.records = recs;
    Ok((out, traj))
}

fn run_bump(cfg: &RunConfig, dir: &Path) -> Result<ExperimentOutcome> {
    let (mut out, _) = geodesic_pipeline("bump", cfg, dir)?;
    if is_default_bump(cfg) {
        let target = PI * PI / 12.0;
        let worst = out.records.iter().map(|r| (r.energy / target - 1.0).abs()).fold(0.0, f64::max);
        out.check(
            "bump energy",
            worst <= 5e-3,
            format!("max relative deviation from pi^2/12 = {target:.6} is {worst:.3e} (limit 5e-3)"),
        );
    }
    Ok(out)
}

fn run_selfx(cfg: &RunConfig, dir: &Path) -> Result<ExperimentOutcome> {
    let mut cfg = cfg.clone();
    if cfg.momentum == MomentumSpec::Expression(DEFAULT_MOMENTUM.to_string()) {
        cfg.momentum = MomentumSpec::Expression("6 * sin(u) * sin(2 * v)".to_string());
    }
    let (mut out, traj) = geodesic_pipeline("selfx", &cfg, dir)?;
    let folded = folded_triangles(&traj.frames[0].immersion, &traj.last().immersion);
    out.notes.push(format!("{folded} triangles flipped orientation by the final frame"));
    Ok(out)
}

fn run_spheres(cfg: &RunConfig, dir: &Path) -> Result<ExperimentOutcome> {
    let mut out = ExperimentOutcome::new("spheres");
    create_dir(dir)?;
    let ex = &cfg.experiment;
    let (n, params) = (ex.sphere_n, cfg.params);
    let dt = 1e-4;
    let traj = match sphere_geodesic_ode(ex.sphere_r0, ex.sphere_rdot0, &params, n, dt, cfg.t_final) {
        Ok(t) => t,
        Err(Error::SphereCollapse { t }) => {
            out.notes.push(format!("radius reaches zero at t = {t:.6}; trajectory truncated"));
            sphere_geodesic_ode(ex.sphere_r0, ex.sphere_rdot0, &params, n, dt, 0.9 * t)?
        }
        Err(e) => return Err(e),
    };
    let e0 = sphere_energy(traj.r[0], traj.rt[0], &params, n);
    let mut worst: f64 = 0.0;
    let mut rows = Vec::new();
    for k in 0..traj.t.len() {
        let e = sphere_energy(traj.r[k], traj.rt[k], &params, n);
        worst = worst.max((e - e0).abs() / e0.abs().max(f64::MIN_POSITIVE));
        if k % 100 == 0 || k + 1 == traj.t.len() {
            rows.push(vec![traj.t[k], traj.r[k], traj.rt[k], e]);
        }
    }
    let path = dir.join("sphere_ode.csv");
    write_table(&path, &["t", "r", "r_t", "energy"], &rows)?;
    out.artifacts.push(path);
    out.check(
        "sphere energy conservation",
        worst <= 1e-8,
        format!("max relative drift {worst:.3e} at dt = {dt} (limit 1e-8)"),
    );

    let rep = classify_completeness(n, &params)?;
    let path = dir.join("completeness.csv");
    let rows: Vec<Vec<f64>> = rep.lengths.iter().map(|&(le, l)| vec![le, l, l / rep.benchmark]).collect();
    write_table(&path, &["log_eps", "length", "length_over_benchmark"], &rows)?;
    out.artifacts.push(path);
    let verdict = if rep.complete { "complete" } else { "incomplete" };
    out.notes.push(format!("n = {n}, A = {}, p = {}: {verdict}", params.a, params.p));
    out.check(
        "completeness classification",
        rep.complete == rep.predicted_complete,
        format!("divergence test says {verdict}; p >= (n+1)/2 predicts {}", if rep.predicted_complete { "complete" } else { "incomplete" }),
    );
    Ok(out)
}

fn run_zigzag(cfg: &RunConfig, dir: &Path) -> Result<ExperimentOutcome> {
    let mut out = ExperimentOutcome::new("zigzag");
    create_dir(dir)?;
    let base = ZigzagBase::default_translation();
    let levels = &cfg.experiment.zigzag_levels;
    let lengths = levels
        .iter()
        .map(|&n| zigzag_horizontal_length(&base, n))
        .collect::<Result<Vec<f64>>>()?;
    let path = dir.join("zigzag.csv");
    let rows: Vec<Vec<f64>> = levels.iter().zip(&lengths).map(|(&n, &l)| vec![f64::from(n), l]).collect();
    write_table(&path, &["n", "length"], &rows)?;
    out.artifacts.push(path);
    let decreasing = lengths.windows(2).all(|w| w[1] < w[0]);
    let table: Vec<String> = levels.iter().zip(&lengths).map(|(n, l)| format!("L({n}) = {l:.6}")).collect();
    out.check("zigzag monotone", decreasing, table.join(", "));
    if let (Some(first), Some(last)) = (lengths.first(), lengths.last()) {
        out.notes.push(format!("L(last)/L(first) = {:.4}", last / first));
    }
    Ok(out)
}

fn run_frechet(cfg: &RunConfig, dir: &Path) -> Result<ExperimentOutcome> {
    let mut out = ExperimentOutcome::new("frechet-scaling");
    create_dir(dir)?;
    let (major, minor) = match cfg.immersion {
        ImmersionSpec::Torus { major, minor } => (major, minor),
        _ => (3.0, 1.0),
    };
    let grid = ParamGrid::periodic(cfg.nu, cfg.nv, (0.0, 2.0 * PI), (0.0, 2.0 * PI))?;
    let f0 = Immersion::torus(grid, major, minor)?;
    build_geometry(&f0)?;
    let ell = cfg.experiment.ell;
    let r_floor = cfg.experiment.r_floor;
    let small = shrink_translate_grow(&f0, &cfg.params, r_floor, ell)?;
    let large = shrink_translate_grow(&f0, &cfg.params, r_floor, 10.0 * ell)?;
    let path = dir.join("frechet.csv");
    let row = |r: &crate::analytic::FrechetReport| {
        vec![r.translation_distance, r.scaling_length, r.translation_length, r.total, r.frechet_displacement]
    };
    write_table(
        &path,
        &["ell", "scaling_length", "translation_length", "total", "frechet_displacement"],
        &[row(&small), row(&large)],
    )?;
    out.artifacts.push(path);
    let change = (large.total / small.total - 1.0).abs();
    out.check(
        "path cost insensitive to distance",
        change < 0.05,
        format!("total {:.6} -> {:.6} ({:.3}% change, limit 5%)", small.total, large.total, 100.0 * change),
    );
    let ratio = large.frechet_displacement / small.frechet_displacement;
    out.check(
        "Frechet displacement grows",
        (ratio - 10.0).abs() < 1e-12,
        format!("displacement ratio {ratio}"),
    );
    Ok(out)
}

/// Integrate the configured geodesic into `cfg.output_dir`.
pub fn run_config(cfg: &RunConfig) -> Result<ExperimentOutcome> {
    let dir = cfg.output_dir.clone();
    let (mut out, _) = geodesic_pipeline("run", cfg, &dir)?;
    out.write_report(&dir)?;
    Ok(out)
}

/// Run a named experiment, writing into `cfg.output_dir/<name>`.
pub fn run_experiment(name: &str, cfg: &RunConfig) -> Result<ExperimentOutcome> {
    let exp: Experiment = name.parse()?;
    let dir = cfg.output_dir.join(exp.name());
    let mut out = match exp {
        Experiment::Bump => run_bump(cfg, &dir)?,
        Experiment::Image => {
            let mut c = cfg.clone();
            if let MomentumSpec::Expression(_) = c.momentum {
                c.momentum = MomentumSpec::Image { path: None, sigma: 2.0 };
            }
            geodesic_pipeline("image", &c, &dir)?.0
        }
        Experiment::Spheres => run_spheres(cfg, &dir)?,
        Experiment::Zigzag => run_zigzag(cfg, &dir)?,
        Experiment::FrechetScaling => run_frechet(cfg, &dir)?,
        Experiment::SelfIntersection => run_selfx(cfg, &dir)?,
    };
    out.write_report(&dir)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::config::parse_config_with_overrides;

    fn cfg(dir: &Path, extra: &[&str]) -> RunConfig {
        let mut o: Vec<String> = extra.iter().map(|s| s.to_string()).collect();
        o.push(format!("output_dir={}", dir.display()));
        parse_config_with_overrides("", &o).unwrap()
    }

    #[test]
    fn unknown_name_is_rejected() {
        let d = tempfile::tempdir().unwrap();
        assert!(matches!(run_experiment("warp", &cfg(d.path(), &[])), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn spheres_p2_is_complete() {
        let d = tempfile::tempdir().unwrap();
        let out = run_experiment("spheres", &cfg(d.path(), &["p=2", "t_final=1"])).unwrap();
        assert!(out.passed(), "{}", out.report());
        assert!(out.notes.iter().any(|n| n.ends_with(": complete")));
        assert!(d.path().join("spheres/completeness.csv").exists());
    }

    #[test]
    fn spheres_p1_collapses_and_is_incomplete() {
        let d = tempfile::tempdir().unwrap();
        let out = run_experiment("spheres", &cfg(d.path(), &["sphere_rdot0=-2", "t_final=5"])).unwrap();
        assert!(out.passed(), "{}", out.report());
        assert!(out.notes.iter().any(|n| n.ends_with(": incomplete")));
        assert!(out.notes.iter().any(|n| n.contains("radius reaches zero")));
    }

    #[test]
    fn zigzag_table_is_monotone() {
        let d = tempfile::tempdir().unwrap();
        let out = run_experiment("zigzag", &cfg(d.path(), &["zigzag_levels=4,8,16"])).unwrap();
        assert!(out.passed(), "{}", out.report());
        let text = std::fs::read_to_string(d.path().join("zigzag/zigzag.csv")).unwrap();
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn frechet_scaling_passes_on_a_coarse_torus() {
        let d = tempfile::tempdir().unwrap();
        let out = run_experiment("frechet-scaling", &cfg(d.path(), &["n=24"])).unwrap();
        assert!(out.passed(), "{}", out.report());
    }

    #[test]
    fn small_bump_run_is_deterministic() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let extra = ["n=13", "t_final=0.5", "dt=0.1"];
        let o1 = run_experiment("bump", &cfg(d1.path(), &extra)).unwrap();
        run_experiment("bump", &cfg(d2.path(), &extra)).unwrap();
        assert!(o1.checks.iter().any(|c| c.name == "energy drift" && c.passed), "{}", o1.report());
        for file in ["diagnostics.csv", "frame_00005.obj"] {
            let a = std::fs::read(d1.path().join("bump").join(file)).unwrap();
            let b = std::fs::read(d2.path().join("bump").join(file)).unwrap();
            assert_eq!(a, b, "{file}");
        }
        assert_eq!(o1.records.len(), 6);
    }

    #[test]
    fn image_run_uses_builtin_glyph() {
        let d = tempfile::tempdir().unwrap();
        let out = run_experiment("image", &cfg(d.path(), &["n=17", "t_final=0.2", "dt=0.1", "write_obj=false"])).unwrap();
        assert!(d.path().join("image/momentum.pgm").exists());
        assert!(out.records[0].energy > 0.0);
        assert!(!d.path().join("image/frame_00000.obj").exists());
    }

    #[test]
    fn run_config_from_obj_file() {
        let d = tempfile::tempdir().unwrap();
        let f = Immersion::flat(ParamGrid::square(9).unwrap());
        let obj = d.path().join("start.obj");
        super::super::export::write_obj(&obj, &f).unwrap();
        let text = format!("n = 9\nimmersion = from_file\nimmersion_file = {}\nt_final = 0.1\ndt = 0.05\n", obj.display());
        let mut c = parse_config_with_overrides(&text, &[format!("output_dir={}", d.path().join("o").display())]).unwrap();
        c.resolve_paths(d.path());
        let out = run_config(&c).unwrap();
        assert_eq!(out.records.len(), 3);
        c.nu = 10;
        assert!(matches!(build_immersion(&c), Err(Error::Format { .. }) | Err(Error::InvalidGrid(_))));
    }
}
