//! Conserved quantities, path functionals and the two inequality checks.

use nalgebra::{Vector2, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::geodesics::{Frame, MomentumDensity};
use crate::geometry::{build_geometry, integrate, split_tangent_normal, GeometryCache, Immersion};
use crate::operator::{apply_p, gp_inner, tangent_norm, tangential_part, OperatorParams};

/// Per-frame diagnostics; the cumulative fields integrate from the first frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// `G^P(f_t, f_t)`.
    pub energy: f64,
    /// `∫ P f_t vol(g)`.
    pub linear_momentum: Vector3<f64>,
    /// `∫ f × P f_t vol(g)` (right-hand rule).
    pub angular_momentum: Vector3<f64>,
    /// Weighted norm of `(P f_t)^⊤`.
    pub reparam_momentum_norm: f64,
    pub volume: f64,
    pub swept_area: f64,
    pub path_length: f64,
}

/// Column names of [`DiagnosticsRecord::to_row`].
pub const CSV_COLUMNS: [&str; 12] = [
    "t",
    "energy",
    "linear_momentum_x",
    "linear_momentum_y",
    "linear_momentum_z",
    "angular_momentum_x",
    "angular_momentum_y",
    "angular_momentum_z",
    "reparam_momentum_norm",
    "volume",
    "swept_area",
    "path_length",
];

impl DiagnosticsRecord {
    pub fn to_row(&self) -> [f64; 12] {
        let l = self.linear_momentum;
        let a = self.angular_momentum;
        [
            self.t,
            self.energy,
            l.x,
            l.y,
            l.z,
            a.x,
            a.y,
            a.z,
            self.reparam_momentum_norm,
            self.volume,
            self.swept_area,
            self.path_length,
        ]
    }
}

pub fn energy(cache: &GeometryCache, params: &OperatorParams, f_t: &VectorField) -> Result<f64> {
    gp_inner(cache, params, f_t, f_t)
}

pub fn linear_momentum(cache: &GeometryCache, params: &OperatorParams, f_t: &VectorField) -> Result<Vector3<f64>> {
    Ok(integrate(cache, apply_p(cache, params, f_t)?.as_slice()))
}

pub fn angular_momentum(cache: &GeometryCache, params: &OperatorParams, f: &Immersion, f_t: &VectorField) -> Result<Vector3<f64>> {
    let pft = apply_p(cache, params, f_t)?;
    let moment: Vec<Vector3<f64>> = f.points().iter().zip(pft.iter()).map(|(x, p)| x.cross(p)).collect();
    Ok(integrate(cache, &moment))
}

/// Reparametrization momentum density `g((P f_t)^⊤) √det g = Tfᵀ(P f_t) √det g` per node.
pub fn reparam_momentum(cache: &GeometryCache, params: &OperatorParams, f_t: &VectorField) -> Result<Vec<Vector2<f64>>> {
    let pft = apply_p(cache, params, f_t)?;
    Ok(cache
        .nodes()
        .iter()
        .zip(pft.iter())
        .map(|(geo, p)| geo.pull_back(p) * geo.sqrt_det)
        .collect())
}

/// `(∫ g((P f_t)^⊤, (P f_t)^⊤) vol(g))^{1/2}`.
pub fn reparam_momentum_norm(cache: &GeometryCache, params: &OperatorParams, f_t: &VectorField) -> Result<f64> {
    Ok(tangent_norm(cache, &tangential_part(cache, params, f_t)?))
}

/// `∫ ‖f_t^⊥‖ vol(g)`: the rate at which area is swept out.
pub fn normal_speed_integral(cache: &GeometryCache, f_t: &VectorField) -> Result<f64> {
    let (_, perp) = split_tangent_normal(cache, f_t)?;
    let norms: Vec<f64> = perp.iter().map(|v| v.norm()).collect();
    Ok(integrate(cache, &norms))
}

impl Frame {
    /// A frame of an arbitrary path with known velocity; its momentum is `P f_t √det g`.
    pub fn kinematic(t: f64, immersion: Immersion, velocity: VectorField, params: &OperatorParams) -> Result<Frame> {
        let cache = build_geometry(&immersion)?;
        let pft = apply_p(&cache, params, &velocity)?;
        let density = VectorField(cache.nodes().iter().zip(pft.iter()).map(|(g, p)| p * g.sqrt_det).collect());
        Ok(Frame {
            t,
            immersion,
            velocity,
            momentum: MomentumDensity::Vector(density),
        })
    }
}

struct FrameValues {
    record: DiagnosticsRecord,
    normal_speed: f64,
}

fn frame_values(frame: &Frame, params: &OperatorParams) -> Result<FrameValues> {
    let cache = build_geometry(&frame.immersion)?;
    let v = &frame.velocity;
    Ok(FrameValues {
        record: DiagnosticsRecord {
            t: frame.t,
            energy: energy(&cache, params, v)?,
            linear_momentum: linear_momentum(&cache, params, v)?,
            angular_momentum: angular_momentum(&cache, params, &frame.immersion, v)?,
            reparam_momentum_norm: reparam_momentum_norm(&cache, params, v)?,
            volume: cache.volume(),
            swept_area: 0.0,
            path_length: 0.0,
        },
        normal_speed: normal_speed_integral(&cache, v)?,
    })
}

/// Diagnostics for every frame, with swept area and path length accumulated by the
/// trapezoidal rule in time.
pub fn evaluate_frames(frames: &[Frame], params: &OperatorParams) -> Result<Vec<DiagnosticsRecord>> {
    let values = frames
        .par_iter()
        .map(|f| frame_values(f, params))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(values.len());
    let (mut area, mut length) = (0.0, 0.0);
    for (k, v) in values.iter().enumerate() {
        if k > 0 {
            let prev = &values[k - 1];
            let dt = v.record.t - prev.record.t;
            area += 0.5 * dt * (v.normal_speed + prev.normal_speed);
            length += 0.5 * dt * (v.record.energy.max(0.0).sqrt() + prev.record.energy.max(0.0).sqrt());
        }
        out.push(DiagnosticsRecord {
            swept_area: area,
            path_length: length,
            ..v.record
        });
    }
    Ok(out)
}

/// Total area swept out by the sampled path.
pub fn swept_area(frames: &[Frame], params: &OperatorParams) -> Result<f64> {
    Ok(evaluate_frames(frames, params)?.last().map_or(0.0, |r| r.swept_area))
}

/// Result of checking an inequality `lhs ≤ rhs` up to a discretization slack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    /// `rhs + slack - lhs`; negative on violation.
    pub margin: f64,
    pub holds: bool,
}

impl InequalityReport {
    fn new(lhs: f64, rhs: f64, slack: f64) -> Self {
        let margin = rhs + slack - lhs;
        InequalityReport {
            lhs,
            rhs,
            slack,
            margin,
            holds: margin >= 0.0,
        }
    }
}

/// Relative slack `h² + Δt` for a grid spacing `h` and frame spacing `Δt`.
pub fn discretization_slack(h: f64, dt: f64) -> f64 {
    h * h + dt
}

fn check_nonempty(records: &[DiagnosticsRecord]) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidParameter("inequality checks need at least one frame".into()));
    }
    Ok(())
}

/// `C₁ · (area swept out) ≤ max_t √Vol · L` with `C₁ = 1`.
pub fn area_swept_check(records: &[DiagnosticsRecord], relative_slack: f64) -> Result<InequalityReport> {
    check_nonempty(records)?;
    let last = records.last().expect("nonempty");
    let max_vol = records.iter().map(|r| r.volume).fold(0.0, f64::max);
    let rhs = max_vol.sqrt() * last.path_length;
    Ok(InequalityReport::new(last.swept_area, rhs, relative_slack * rhs))
}

/// `|√Vol(f(T)) - √Vol(f(0))| ≤ L / (2 C₂)` with `C₂ = 1`.
///
/// Requires `A ≥ 1` and `p = 1`, where `G^P` dominates the `H¹` norm.
pub fn sqrt_vol_lipschitz_check(
    records: &[DiagnosticsRecord],
    params: &OperatorParams,
    relative_slack: f64,
) -> Result<InequalityReport> {
    lipschitz_with_constant(records, params, relative_slack, 0.5)
}

/// The same check with constant `√m / (2 C₂)` (`m = 2`), which is what the Cauchy–Schwarz
/// step yields once `∫ ‖Tf‖² vol(g) = m · Vol` is accounted for.
pub fn sqrt_vol_lipschitz_check_dimensional(
    records: &[DiagnosticsRecord],
    params: &OperatorParams,
    relative_slack: f64,
) -> Result<InequalityReport> {
    lipschitz_with_constant(records, params, relative_slack, 0.5 * 2f64.sqrt())
}

fn lipschitz_with_constant(
    records: &[DiagnosticsRecord],
    params: &OperatorParams,
    relative_slack: f64,
    constant: f64,
) -> Result<InequalityReport> {
    check_nonempty(records)?;
    if params.a < 1.0 || params.p != 1 {
        return Err(Error::InvalidParameter(
            "the sqrt(Vol) Lipschitz check needs A >= 1 and p = 1".into(),
        ));
    }
    let first = records.first().expect("nonempty");
    let last = records.last().expect("nonempty");
    let lhs = (last.volume.sqrt() - first.volume.sqrt()).abs();
    let rhs = constant * last.path_length;
    Ok(InequalityReport::new(lhs, rhs, relative_slack * rhs))
}
