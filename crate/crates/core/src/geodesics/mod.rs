//! Geodesic initial value problems on the space of immersions.
//!
//! Two formulations are integrated by the method of lines:
//!
//! * the horizontal hypersurface form with state `(f, b)`, `b = a·√det g`, where
//!   `P f_t = a ν`;
//! * the general immersion form with state `(f, p)`, `p = P f_t · √det g`.
//!
//! Each right-hand-side evaluation rebuilds the geometry, assembles `P` and performs
//! one solve. Time stepping is explicit (RK4 by default).

mod lift;
mod rhs;

use std::str::FromStr;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::geometry::{build_geometry, GeometryCache, Immersion};
use crate::operator::{AssembledOperator, LinearSolverOptions, OperatorParams};

pub use lift::{horizontal_lift, tangential_residual, HorizontalLift};
pub use rhs::{adjoint_gradient, scalar_momentum_rhs_general, scalar_momentum_rhs_p1, vector_momentum_rhs};

/// Explicit time-stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    Rk4,
    ExplicitEuler,
}

impl Integrator {
    pub fn name(self) -> &'static str {
        match self {
            Integrator::Rk4 => "rk4",
            Integrator::ExplicitEuler => "explicit_euler",
        }
    }
}

impl FromStr for Integrator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rk4" => Ok(Integrator::Rk4),
            "explicit_euler" | "euler" => Ok(Integrator::ExplicitEuler),
            other => Err(Error::InvalidParameter(format!(
                "unknown integrator '{other}' (expected rk4 or explicit_euler)"
            ))),
        }
    }
}

/// Time integration settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub params: OperatorParams,
    pub dt: f64,
    pub t_final: f64,
    pub integrator: Integrator,
    pub linear: LinearSolverOptions,
    /// Keep every `stride`-th step as an output frame (the final state is always kept).
    pub stride: usize,
    /// Estimate the stiffness at `t = 0` and warn when `dt · λ ≥ 1`.
    pub cfl_check: bool,
}

impl SolverConfig {
    pub fn new(params: OperatorParams, dt: f64, t_final: f64) -> Result<Self> {
        let config = SolverConfig {
            params,
            dt,
            t_final,
            integrator: Integrator::Rk4,
            linear: LinearSolverOptions::default(),
            stride: 1,
            cfl_check: true,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(Error::InvalidParameter(format!("t_final must be >= 0, got {}", self.t_final)));
        }
        if self.stride == 0 {
            return Err(Error::InvalidParameter("stride must be >= 1".into()));
        }
        if !(self.linear.tol > 0.0) {
            return Err(Error::InvalidParameter("linear solver tolerance must be > 0".into()));
        }
        Ok(())
    }

    /// Number of steps needed to reach `t_final` (the last one may be shorter than `dt`).
    pub fn step_count(&self) -> usize {
        (self.t_final / self.dt - 1e-9).ceil().max(0.0) as usize
    }
}

/// State of the horizontal hypersurface equation.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicState {
    pub f: Immersion,
    /// `b = a·√det g`, zero on Dirichlet boundary nodes.
    pub b: ScalarField,
    pub t: f64,
}

impl GeodesicState {
    pub fn new(f: Immersion, b: ScalarField, t: f64) -> Result<Self> {
        b.check_len(f.grid().len())?;
        let grid = f.grid();
        if (0..grid.len()).any(|n| grid.is_boundary_node(n) && b[n] != 0.0) {
            return Err(Error::InvalidParameter("momentum density must vanish on the Dirichlet boundary".into()));
        }
        if b.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("momentum density is not finite".into()));
        }
        Ok(GeodesicState { f, b, t })
    }

    /// State with `P f_t = a ν`; `a` is zeroed on the boundary ring.
    pub fn from_normal_momentum(f: Immersion, a: &ScalarField) -> Result<Self> {
        a.check_len(f.grid().len())?;
        let cache = build_geometry(&f)?;
        let grid = *f.grid();
        let b = (0..grid.len())
            .map(|n| if grid.is_boundary_node(n) { 0.0 } else { a[n] * cache.node(n).sqrt_det })
            .collect();
        Self::new(f, ScalarField(b), 0.0)
    }

    /// Same shape, momentum reversed.
    pub fn reversed(&self) -> Self {
        GeodesicState {
            f: self.f.clone(),
            b: self.b.scaled(-1.0),
            t: self.t,
        }
    }
}

/// State of the general immersion equation.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorMomentumState {
    pub f: Immersion,
    /// `p = P f_t · √det g`.
    pub pvec: VectorField,
    pub t: f64,
}

impl VectorMomentumState {
    pub fn new(f: Immersion, pvec: VectorField, t: f64) -> Result<Self> {
        pvec.check_len(f.grid().len())?;
        let grid = f.grid();
        if (0..grid.len()).any(|n| grid.is_boundary_node(n) && pvec[n] != Vector3::zeros()) {
            return Err(Error::InvalidParameter("momentum density must vanish on the Dirichlet boundary".into()));
        }
        Ok(VectorMomentumState { f, pvec, t })
    }

    /// `p = b ν`, the vector form of a horizontal state.
    pub fn from_horizontal(state: &GeodesicState) -> Result<Self> {
        let cache = build_geometry(&state.f)?;
        let pvec = VectorField(cache.nodes().iter().zip(state.b.iter()).map(|(g, b)| g.normal * *b).collect());
        Self::new(state.f.clone(), pvec, state.t)
    }

    pub fn reversed(&self) -> Self {
        VectorMomentumState {
            f: self.f.clone(),
            pvec: self.pvec.scaled(-1.0),
            t: self.t,
        }
    }
}

/// Momentum carried by an output frame.
#[derive(Debug, Clone, PartialEq)]
pub enum MomentumDensity {
    Scalar(ScalarField),
    Vector(VectorField),
}

/// One output sample of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub t: f64,
    pub immersion: Immersion,
    /// `f_t` at this time.
    pub velocity: VectorField,
    pub momentum: MomentumDensity,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub frames: Vec<Frame>,
    pub params: OperatorParams,
    pub dt: f64,
    /// Power-iteration estimate of the largest Jacobian eigenvalue magnitude at `t0`.
    pub stiffness_estimate: Option<f64>,
}

impl Trajectory {
    pub fn last(&self) -> &Frame {
        self.frames.last().expect("trajectories hold at least one frame")
    }

    /// Final horizontal state, if this trajectory came from the horizontal equation.
    pub fn final_horizontal_state(&self) -> Option<GeodesicState> {
        let last = self.last();
        match &last.momentum {
            MomentumDensity::Scalar(b) => Some(GeodesicState {
                f: last.immersion.clone(),
                b: b.clone(),
                t: last.t,
            }),
            MomentumDensity::Vector(_) => None,
        }
    }

    pub fn final_vector_state(&self) -> Option<VectorMomentumState> {
        let last = self.last();
        match &last.momentum {
            MomentumDensity::Vector(p) => Some(VectorMomentumState {
                f: last.immersion.clone(),
                pvec: p.clone(),
                t: last.t,
            }),
            MomentumDensity::Scalar(_) => None,
        }
    }
}

/// Geometry and assembled operator at one immersion.
pub struct Linearization {
    pub cache: GeometryCache,
    pub operator: AssembledOperator,
}

impl Linearization {
    pub fn new(f: &Immersion, params: &OperatorParams, linear: &LinearSolverOptions) -> Result<Self> {
        let cache = build_geometry(f)?;
        let operator = AssembledOperator::assemble(&cache, params, linear)?;
        Ok(Linearization { cache, operator })
    }
}

/// `f_t = P⁻¹((b/√det g) ν)`.
pub fn velocity_from_scalar_momentum(cache: &GeometryCache, op: &AssembledOperator, b: &ScalarField) -> Result<VectorField> {
    b.check_len(cache.len())?;
    let rhs = VectorField(cache.nodes().iter().zip(b.iter()).map(|(g, b)| g.normal * (b / g.sqrt_det)).collect());
    op.solve_p(cache, &rhs)
}

/// `f_t = P⁻¹(p/√det g)`.
pub fn velocity_from_vector_momentum(cache: &GeometryCache, op: &AssembledOperator, pvec: &VectorField) -> Result<VectorField> {
    pvec.check_len(cache.len())?;
    let rhs = VectorField(cache.nodes().iter().zip(pvec.iter()).map(|(g, p)| p / g.sqrt_det).collect());
    op.solve_p(cache, &rhs)
}

/// Vector space structure needed by the explicit schemes.
trait OdeState: Clone {
    fn axpy(&mut self, alpha: f64, other: &Self);
    fn scale(&mut self, alpha: f64);
    fn dot(&self, other: &Self) -> f64;
}

#[derive(Debug, Clone)]
struct Pair<M> {
    f: Vec<Vector3<f64>>,
    m: Vec<M>,
}

trait Component: Copy + std::ops::MulAssign<f64> {
    fn axpy(&mut self, alpha: f64, other: &Self);
    fn dot(&self, other: &Self) -> f64;
}

impl Component for f64 {
    fn axpy(&mut self, alpha: f64, other: &Self) {
        *self += alpha * other;
    }
    fn dot(&self, other: &Self) -> f64 {
        self * other
    }
}

impl Component for Vector3<f64> {
    fn axpy(&mut self, alpha: f64, other: &Self) {
        *self += other * alpha;
    }
    fn dot(&self, other: &Self) -> f64 {
        Vector3::dot(self, other)
    }
}

impl<M: Component> OdeState for Pair<M> {
    fn axpy(&mut self, alpha: f64, other: &Self) {
        for (a, b) in self.f.iter_mut().zip(&other.f) {
            *a += b * alpha;
        }
        for (a, b) in self.m.iter_mut().zip(&other.m) {
            a.axpy(alpha, b);
        }
    }

    fn scale(&mut self, alpha: f64) {
        self.f.iter_mut().for_each(|a| *a *= alpha);
        self.m.iter_mut().for_each(|a| *a *= alpha);
    }

    fn dot(&self, other: &Self) -> f64 {
        self.f.iter().zip(&other.f).map(|(a, b)| a.dot(b)).sum::<f64>()
            + self.m.iter().zip(&other.m).map(|(a, b)| a.dot(b)).sum::<f64>()
    }
}

fn combine<S: OdeState>(x: &S, terms: &[(f64, &S)]) -> S {
    let mut out = x.clone();
    for (alpha, k) in terms {
        out.axpy(*alpha, k);
    }
    out
}

fn step<S: OdeState>(
    integrator: Integrator,
    x: &S,
    k1: &S,
    h: f64,
    eval: &mut impl FnMut(&S) -> Result<S>,
) -> Result<S> {
    match integrator {
        Integrator::ExplicitEuler => Ok(combine(x, &[(h, k1)])),
        Integrator::Rk4 => {
            let k2 = eval(&combine(x, &[(0.5 * h, k1)]))?;
            let k3 = eval(&combine(x, &[(0.5 * h, &k2)]))?;
            let k4 = eval(&combine(x, &[(h, &k3)]))?;
            Ok(combine(x, &[(h / 6.0, k1), (h / 3.0, &k2), (h / 3.0, &k3), (h / 6.0, &k4)]))
        }
    }
}

/// Power iteration on finite-difference Jacobian-vector products.
fn stiffness_estimate<S: OdeState>(x: &S, fx: &S, eval: &mut impl FnMut(&S) -> Result<S>, seed: &S) -> Result<f64> {
    let norm = |s: &S| s.dot(s).sqrt();
    let xnorm = norm(x);
    let mut v = seed.clone();
    let mut lambda = 0.0;
    for _ in 0..8 {
        let vn = norm(&v);
        if vn == 0.0 {
            return Ok(0.0);
        }
        let eps = 1e-7 * (1.0 + xnorm) / vn;
        let mut jv = eval(&combine(x, &[(eps, &v)]))?;
        jv.axpy(-1.0, fx);
        jv.scale(1.0 / eps);
        lambda = norm(&jv) / vn;
        v = jv;
    }
    Ok(lambda)
}

fn abort(t: f64) -> impl Fn(Error) -> Error {
    move |e| Error::IntegrationAborted { t, source: Box::new(e) }
}

/// Shared driver: `eval` returns the derivative at a state, `frame` builds an output sample.
fn integrate<S: OdeState>(
    x0: S,
    t0: f64,
    config: &SolverConfig,
    mut eval: impl FnMut(&S) -> Result<S>,
    frame: impl Fn(&S, f64, &S) -> Result<Frame>,
) -> Result<Trajectory> {
    config.validate()?;
    let n_steps = config.step_count();
    let t_end = t0 + config.t_final;
    let mut x = x0;
    let mut t = t0;
    let mut frames = Vec::new();
    let mut estimate = None;
    for k in 0..=n_steps {
        let k1 = eval(&x).map_err(abort(t))?;
        if k % config.stride == 0 || k == n_steps {
            frames.push(frame(&x, t, &k1)?);
        }
        if k == 0 && config.cfl_check && n_steps > 0 {
            let lambda = stiffness_estimate(&x, &k1, &mut eval, &k1).map_err(abort(t))?;
            if config.dt * lambda >= 1.0 {
                log::warn!(
                    "time step {} may be unstable: dt * |lambda| = {:.3} with |lambda| ~ {:.3e}",
                    config.dt,
                    config.dt * lambda,
                    lambda
                );
            }
            estimate = Some(lambda);
        }
        if k == n_steps {
            break;
        }
        let h = if k + 1 == n_steps { t_end - t } else { config.dt };
        x = step(config.integrator, &x, &k1, h, &mut eval).map_err(abort(t))?;
        t = if k + 1 == n_steps { t_end } else { t0 + (k + 1) as f64 * config.dt };
    }
    Ok(Trajectory {
        frames,
        params: config.params,
        dt: config.dt,
        stiffness_estimate: estimate,
    })
}

/// Evaluate `(f_t, ∂_t b)` at a horizontal state.
pub fn horizontal_derivative(
    f: &Immersion,
    b: &ScalarField,
    params: &OperatorParams,
    linear: &LinearSolverOptions,
) -> Result<(VectorField, ScalarField)> {
    let lin = Linearization::new(f, params, linear)?;
    let f_t = velocity_from_scalar_momentum(&lin.cache, &lin.operator, b)?;
    let b_t = if params.p == 1 {
        scalar_momentum_rhs_p1(&lin.cache, params, &f_t)?
    } else {
        scalar_momentum_rhs_general(&lin.cache, params, &f_t)?
    };
    Ok((f_t, b_t))
}

/// Evaluate `(f_t, ∂_t p)` at a vector-momentum state.
pub fn vector_derivative(
    f: &Immersion,
    pvec: &VectorField,
    params: &OperatorParams,
    linear: &LinearSolverOptions,
) -> Result<(VectorField, VectorField)> {
    let lin = Linearization::new(f, params, linear)?;
    let f_t = velocity_from_vector_momentum(&lin.cache, &lin.operator, pvec)?;
    let p_t = vector_momentum_rhs(&lin.cache, params, &f_t)?;
    Ok((f_t, p_t))
}

/// Integrate the horizontal hypersurface geodesic equation.
pub fn integrate_horizontal_geodesic(state0: &GeodesicState, config: &SolverConfig) -> Result<Trajectory> {
    let base = state0.f.clone();
    let x0 = Pair {
        f: base.points().to_vec(),
        m: state0.b.0.clone(),
    };
    let params = config.params;
    let linear = config.linear;
    let eval = |x: &Pair<f64>| -> Result<Pair<f64>> {
        let f = base.with_points(x.f.clone())?;
        let (f_t, b_t) = horizontal_derivative(&f, &ScalarField(x.m.clone()), &params, &linear)?;
        Ok(Pair { f: f_t.0, m: b_t.0 })
    };
    let frame = |x: &Pair<f64>, t: f64, d: &Pair<f64>| -> Result<Frame> {
        Ok(Frame {
            t,
            immersion: base.with_points(x.f.clone())?,
            velocity: VectorField(d.f.clone()),
            momentum: MomentumDensity::Scalar(ScalarField(x.m.clone())),
        })
    };
    integrate(x0, state0.t, config, eval, frame)
}

/// Integrate the general flat-ambient geodesic equation in vector momentum form.
pub fn integrate_immersion_geodesic(state0: &VectorMomentumState, config: &SolverConfig) -> Result<Trajectory> {
    let base = state0.f.clone();
    let x0 = Pair {
        f: base.points().to_vec(),
        m: state0.pvec.0.clone(),
    };
    let params = config.params;
    let linear = config.linear;
    let eval = |x: &Pair<Vector3<f64>>| -> Result<Pair<Vector3<f64>>> {
        let f = base.with_points(x.f.clone())?;
        let (f_t, p_t) = vector_derivative(&f, &VectorField(x.m.clone()), &params, &linear)?;
        Ok(Pair { f: f_t.0, m: p_t.0 })
    };
    let frame = |x: &Pair<Vector3<f64>>, t: f64, d: &Pair<Vector3<f64>>| -> Result<Frame> {
        Ok(Frame {
            t,
            immersion: base.with_points(x.f.clone())?,
            velocity: VectorField(d.f.clone()),
            momentum: MomentumDensity::Vector(VectorField(x.m.clone())),
        })
    };
    integrate(x0, state0.t, config, eval, frame)
}
