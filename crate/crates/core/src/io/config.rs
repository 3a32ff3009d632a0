//! `key = value` run configuration.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geodesics::{Integrator, SolverConfig};
use crate::grid::ParamGrid;
use crate::operator::{LinearSolverOptions, OperatorParams};

/// One problem in a configuration source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    /// 1-based line number, or `None` for command-line overrides.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "override: {}", self.message),
        }
    }
}

pub(crate) fn render_issues(issues: &[ConfigIssue]) -> String {
    let lines: Vec<String> = issues.iter().map(ToString::to_string).collect();
    format!("invalid configuration:\n  {}", lines.join("\n  "))
}

#[derive(Debug, Clone, PartialEq)]
pub enum ImmersionSpec {
    /// `[0, π]²` in the plane `z = 0` with a Dirichlet boundary.
    FlatSquare,
    /// Periodic torus of revolution.
    Torus { major: f64, minor: f64 },
    /// Vertices of an OBJ file in grid-major order over `[0, π]²`.
    FromFile(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum MomentumSpec {
    /// Normal momentum `a₀(u, v)` given as an expression in `u` and `v`.
    Expression(String),
    /// Normal momentum read from a PGM image; `None` uses the built-in glyph.
    Image { path: Option<PathBuf>, sigma: f64 },
}

/// Parameters that only the analytic experiments read.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentParams {
    pub sphere_n: u32,
    pub sphere_r0: f64,
    pub sphere_rdot0: f64,
    pub r_floor: f64,
    pub ell: f64,
    pub zigzag_levels: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub nu: usize,
    pub nv: usize,
    pub params: OperatorParams,
    pub dt: f64,
    pub t_final: f64,
    pub stride: usize,
    pub integrator: Integrator,
    pub linear_tol: f64,
    pub cfl_check: bool,
    pub immersion: ImmersionSpec,
    pub momentum: MomentumSpec,
    pub output_dir: PathBuf,
    pub write_obj: bool,
    pub write_csv: bool,
    pub experiment: ExperimentParams,
}

pub const DEFAULT_MOMENTUM: &str = "sin(u) * sin(v)";

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            nu: 100,
            nv: 100,
            params: OperatorParams::default(),
            dt: 0.05,
            t_final: 5.0,
            stride: 1,
            integrator: Integrator::Rk4,
            linear_tol: 1e-10,
            cfl_check: true,
            immersion: ImmersionSpec::FlatSquare,
            momentum: MomentumSpec::Expression(DEFAULT_MOMENTUM.to_string()),
            output_dir: PathBuf::from("output"),
            write_obj: true,
            write_csv: true,
            experiment: ExperimentParams {
                sphere_n: 3,
                sphere_r0: 1.0,
                sphere_rdot0: -0.5,
                r_floor: 1e-3,
                ell: 1.0,
                zigzag_levels: vec![4, 8, 16, 32, 64],
            },
        }
    }
}

/// Recognized keys. `n` sets both grid sizes.
pub const KEYS: &[&str] = &[
    "A",
    "p",
    "n",
    "nu",
    "nv",
    "dt",
    "t_final",
    "stride",
    "integrator",
    "linear_tol",
    "cfl_check",
    "immersion",
    "torus_major",
    "torus_minor",
    "immersion_file",
    "momentum",
    "momentum_expr",
    "image_file",
    "smoothing_sigma",
    "output_dir",
    "write_obj",
    "write_csv",
    "sphere_n",
    "sphere_r0",
    "sphere_rdot0",
    "r_floor",
    "ell",
    "zigzag_levels",
];

fn canonical_key(key: &str) -> Option<&'static str> {
    if key == "a" {
        return Some("A");
    }
    KEYS.iter().copied().find(|k| *k == key)
}

fn parse_num<T: FromStr>(value: &str, what: &str) -> std::result::Result<T, String> {
    value.parse().map_err(|_| format!("expected {what}, got '{value}'"))
}

fn parse_bool(value: &str) -> std::result::Result<bool, String> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(format!("expected a boolean, got '{value}'")),
    }
}

fn unquote(value: &str) -> &str {
    let v = value.trim();
    if v.len() >= 2 && ((v.starts_with('"') && v.ends_with('"')) || (v.starts_with('\'') && v.ends_with('\''))) {
        &v[1..v.len() - 1]
    } else {
        v
    }
}

/// Raw key/value assignments before typing; later stages report against `line`.
#[derive(Default)]
struct Assignments {
    values: HashMap<&'static str, (String, Option<usize>)>,
    issues: Vec<ConfigIssue>,
}

impl Assignments {
    fn insert(&mut self, key: &str, value: &str, line: Option<usize>, allow_override: bool) {
        let Some(canon) = canonical_key(key) else {
            self.issues.push(ConfigIssue {
                line,
                message: format!("unknown key '{key}'"),
            });
            return;
        };
        if let Some((_, prev)) = self.values.get(canon) {
            if !allow_override {
                let here = line.map_or("an override".to_string(), |l| format!("line {l}"));
                let first = prev.map_or("an override".to_string(), |l| format!("line {l}"));
                self.issues.push(ConfigIssue {
                    line,
                    message: format!("duplicate key '{canon}' on {first} and {here}"),
                });
                return;
            }
        }
        self.values.insert(canon, (unquote(value).to_string(), line));
    }
}

fn tokenize(text: &str, out: &mut Assignments) {
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let content = content.trim();
        if content.is_empty() {
            continue;
        }
        match content.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => out.insert(k.trim(), v.trim(), Some(line), false),
            _ => out.issues.push(ConfigIssue {
                line: Some(line),
                message: format!("expected 'key = value', got '{content}'"),
            }),
        }
    }
}

/// Parse a configuration; every problem is reported, not just the first.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with_overrides(text, &[])
}

/// Parse a configuration and then apply `key=value` overrides, which may replace file
/// values.
pub fn parse_config_with_overrides(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut asg = Assignments::default();
    tokenize(text, &mut asg);
    for o in overrides {
        match o.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => asg.insert(k.trim(), v.trim(), None, true),
            _ => asg.issues.push(ConfigIssue {
                line: None,
                message: format!("expected key=value, got '{o}'"),
            }),
        }
    }
    build(asg)
}

fn build(mut asg: Assignments) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut issues = std::mem::take(&mut asg.issues);
    let get = |k: &str| asg.values.get(k).map(|(v, l)| (v.as_str(), *l));
    let line_of = |k: &str| asg.values.get(k).and_then(|(_, l)| *l);

    macro_rules! typed {
        ($key:expr, $parse:expr, $set:expr) => {
            if let Some((v, line)) = get($key) {
                match $parse(v) {
                    Ok(x) => $set(x),
                    Err(message) => issues.push(ConfigIssue {
                        line,
                        message: format!("{}: {}", $key, message),
                    }),
                }
            }
        };
    }

    let float = |v: &str| parse_num::<f64>(v, "a number");
    let uint = |v: &str| parse_num::<usize>(v, "a non-negative integer");
    let text = |v: &str| -> std::result::Result<String, String> { Ok(v.to_string()) };

    let mut a = cfg.params.a;
    let mut p = cfg.params.p as usize;
    typed!("A", float, |x| a = x);
    typed!("p", uint, |x| p = x);
    typed!("n", uint, |x| {
        cfg.nu = x;
        cfg.nv = x;
    });
    typed!("nu", uint, |x| cfg.nu = x);
    typed!("nv", uint, |x| cfg.nv = x);
    typed!("dt", float, |x| cfg.dt = x);
    typed!("t_final", float, |x| cfg.t_final = x);
    typed!("stride", uint, |x| cfg.stride = x);
    typed!("integrator", |v: &str| v.parse::<Integrator>().map_err(|e| e.to_string()), |x| cfg.integrator = x);
    typed!("linear_tol", float, |x| cfg.linear_tol = x);
    typed!("cfl_check", parse_bool, |x| cfg.cfl_check = x);
    typed!("write_obj", parse_bool, |x| cfg.write_obj = x);
    typed!("write_csv", parse_bool, |x| cfg.write_csv = x);
    typed!("output_dir", text, |x: String| cfg.output_dir = PathBuf::from(x));

    let mut major = 3.0;
    let mut minor = 1.0;
    typed!("torus_major", float, |x| major = x);
    typed!("torus_minor", float, |x| minor = x);
    let mut immersion_file = None;
    typed!("immersion_file", text, |x: String| immersion_file = Some(PathBuf::from(x)));
    let mut immersion_kind = "flat_square".to_string();
    typed!("immersion", text, |x: String| immersion_kind = x);
    match immersion_kind.as_str() {
        "flat_square" => cfg.immersion = ImmersionSpec::FlatSquare,
        "torus" => cfg.immersion = ImmersionSpec::Torus { major, minor },
        "from_file" => match immersion_file.clone() {
            Some(path) => cfg.immersion = ImmersionSpec::FromFile(path),
            None => issues.push(ConfigIssue {
                line: line_of("immersion"),
                message: "immersion = from_file needs immersion_file".into(),
            }),
        },
        other => issues.push(ConfigIssue {
            line: line_of("immersion"),
            message: format!("immersion: expected flat_square, torus or from_file, got '{other}'"),
        }),
    }

    let mut expr = DEFAULT_MOMENTUM.to_string();
    typed!("momentum_expr", text, |x: String| expr = x);
    let mut image_file = None;
    typed!("image_file", text, |x: String| image_file = Some(PathBuf::from(x)));
    let mut sigma = 2.0;
    typed!("smoothing_sigma", float, |x| sigma = x);
    let mut momentum_kind = if image_file.is_some() { "image" } else { "expression" }.to_string();
    typed!("momentum", text, |x: String| momentum_kind = x);
    match momentum_kind.as_str() {
        "expression" => {
            if let Err(e) = super::expr::MomentumExpr::compile(&expr) {
                issues.push(ConfigIssue {
                    line: line_of("momentum_expr"),
                    message: format!("momentum_expr: {e}"),
                });
            }
            cfg.momentum = MomentumSpec::Expression(expr);
        }
        "image" => cfg.momentum = MomentumSpec::Image { path: image_file, sigma },
        other => issues.push(ConfigIssue {
            line: line_of("momentum"),
            message: format!("momentum: expected expression or image, got '{other}'"),
        }),
    }

    let ex = &mut cfg.experiment;
    typed!("sphere_n", |v: &str| parse_num::<u32>(v, "a non-negative integer"), |x| ex.sphere_n = x);
    typed!("sphere_r0", float, |x| ex.sphere_r0 = x);
    typed!("sphere_rdot0", float, |x| ex.sphere_rdot0 = x);
    typed!("r_floor", float, |x| ex.r_floor = x);
    typed!("ell", float, |x| ex.ell = x);
    typed!(
        "zigzag_levels",
        |v: &str| v
            .split(',')
            .map(|s| parse_num::<u32>(s.trim(), "a comma-separated list of integers"))
            .collect::<std::result::Result<Vec<_>, _>>(),
        |x| ex.zigzag_levels = x
    );

    // constraints, reported against the line that set the offending key
    let mut require = |ok: bool, key: &str, message: String| {
        if !ok {
            issues.push(ConfigIssue {
                line: line_of(key),
                message,
            });
        }
    };
    require(a.is_finite() && a >= 0.0, "A", format!("A must satisfy A >= 0, got {a}"));
    require(p >= 1, "p", format!("p must satisfy p >= 1, got {p}"));
    require(p <= 8, "p", format!("p must satisfy p <= 8, got {p}"));
    let nkey = |k: &str| if asg.values.contains_key(k) { k.to_string() } else { "n".to_string() };
    require(cfg.nu >= 3, &nkey("nu"), format!("nu must be >= 3, got {}", cfg.nu));
    require(cfg.nv >= 3, &nkey("nv"), format!("nv must be >= 3, got {}", cfg.nv));
    require(cfg.dt.is_finite() && cfg.dt > 0.0, "dt", format!("dt must be > 0, got {}", cfg.dt));
    require(
        cfg.t_final.is_finite() && cfg.t_final >= 0.0,
        "t_final",
        format!("t_final must be >= 0, got {}", cfg.t_final),
    );
    require(cfg.stride >= 1, "stride", format!("stride must be >= 1, got {}", cfg.stride));
    require(
        cfg.linear_tol > 0.0 && cfg.linear_tol < 1.0,
        "linear_tol",
        format!("linear_tol must lie in (0, 1), got {}", cfg.linear_tol),
    );
    require(
        major > minor && minor > 0.0,
        if line_of("torus_minor").is_some() { "torus_minor" } else { "torus_major" },
        format!("torus needs torus_major > torus_minor > 0, got {major} and {minor}"),
    );
    require(
        sigma.is_finite() && sigma >= 0.0,
        "smoothing_sigma",
        format!("smoothing_sigma must be >= 0, got {sigma}"),
    );
    let ex = &cfg.experiment;
    require(ex.sphere_n >= 2, "sphere_n", format!("sphere_n must be >= 2, got {}", ex.sphere_n));
    require(ex.sphere_r0 > 0.0, "sphere_r0", format!("sphere_r0 must be > 0, got {}", ex.sphere_r0));
    require(
        ex.r_floor > 0.0 && ex.r_floor < 1.0,
        "r_floor",
        format!("r_floor must lie in (0, 1), got {}", ex.r_floor),
    );
    require(ex.ell >= 0.0, "ell", format!("ell must be >= 0, got {}", ex.ell));
    require(
        !ex.zigzag_levels.is_empty() && ex.zigzag_levels.iter().all(|&n| n >= 1),
        "zigzag_levels",
        "zigzag_levels must be a nonempty list of positive integers".into(),
    );

    if issues.is_empty() {
        cfg.params = OperatorParams::new(a, p as u32)?;
        Ok(cfg)
    } else {
        issues.sort_by_key(|i| i.line.unwrap_or(usize::MAX));
        Err(Error::Config(issues))
    }
}

impl RunConfig {
    /// Resolve relative input paths against `base` (normally the config file's directory).
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let ImmersionSpec::FromFile(p) = &mut self.immersion {
            fix(p);
        }
        if let MomentumSpec::Image { path: Some(p), .. } = &mut self.momentum {
            fix(p);
        }
        fix(&mut self.output_dir);
    }

    pub fn grid(&self) -> Result<ParamGrid> {
        use std::f64::consts::PI;
        match self.immersion {
            ImmersionSpec::Torus { .. } => ParamGrid::periodic(self.nu, self.nv, (0.0, 2.0 * PI), (0.0, 2.0 * PI)),
            _ => ParamGrid::dirichlet(self.nu, self.nv, (0.0, PI), (0.0, PI)),
        }
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let mut s = SolverConfig::new(self.params, self.dt, self.t_final)?;
        s.integrator = self.integrator;
        s.stride = self.stride;
        s.cfl_check = self.cfl_check;
        s.linear = LinearSolverOptions::with_tol(self.linear_tol);
        s.validate()?;
        Ok(s)
    }
}
