//! Horizontal lift of a sampled path of immersions.
//!
//! For a path `f(t)` the vertical part of `∂_t f` is removed by composing with the flow
//! `φ_t = ξ ∘ φ` of `ξ = -(P^⊤)⁻¹((P ∂_t f)^⊤)`; the lifted path is `f ∘ φ`. The flow is
//! integrated with explicit Euler and grid values are transported by bilinear
//! interpolation.

use nalgebra::{Vector2, Vector3};

use crate::error::{Error, Result};
use crate::field::{TangentField, VectorField};
use crate::geometry::Immersion;
use crate::grid::SeamShift;
use crate::operator::{tangent_norm, tangential_part, LinearSolverOptions, OperatorParams};

use super::Linearization;

/// Result of [`horizontal_lift`].
#[derive(Debug, Clone)]
pub struct HorizontalLift {
    /// Reparametrizing field `ξ_k` at each sample of the input path.
    pub xi: Vec<TangentField>,
    /// `φ_k` evaluated at every grid node, in parameter coordinates.
    pub positions: Vec<Vec<Vector2<f64>>>,
    /// The lifted path `f_k ∘ φ_k`.
    pub lifted: Vec<Immersion>,
    /// Set when a Dirichlet grid forced interpolation points back into the domain.
    pub clamped: bool,
}

fn check_path(path: &[Immersion], dt: f64) -> Result<()> {
    if path.len() < 2 {
        return Err(Error::InvalidParameter("a path needs at least two samples".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
    }
    let grid = path[0].grid();
    if path.iter().any(|f| f.grid() != grid) {
        return Err(Error::InvalidParameter("all samples of a path must share one grid".into()));
    }
    Ok(())
}

/// Second-order finite-difference `∂_t f` at sample `k`.
fn path_velocity(path: &[Immersion], dt: f64, k: usize) -> VectorField {
    let pts = |i: usize| path[i].points();
    let n = path.len();
    let combine = |terms: &[(usize, f64)]| -> VectorField {
        VectorField(
            (0..pts(0).len())
                .map(|node| terms.iter().fold(Vector3::zeros(), |acc, (i, w)| acc + pts(*i)[node] * *w))
                .collect(),
        )
    };
    let inv = 1.0 / dt;
    if n == 2 {
        combine(&[(1, inv), (0, -inv)])
    } else if k == 0 {
        combine(&[(0, -1.5 * inv), (1, 2.0 * inv), (2, -0.5 * inv)])
    } else if k + 1 == n {
        combine(&[(k, 1.5 * inv), (k - 1, -2.0 * inv), (k - 2, 0.5 * inv)])
    } else {
        combine(&[(k + 1, 0.5 * inv), (k - 1, -0.5 * inv)])
    }
}

/// Weighted norm of `(P ∂_t f)^⊤` at every sample of a path, with `∂_t f` by finite differences.
pub fn tangential_residual(
    path: &[Immersion],
    dt: f64,
    params: &OperatorParams,
    linear: &LinearSolverOptions,
) -> Result<Vec<f64>> {
    check_path(path, dt)?;
    (0..path.len())
        .map(|k| {
            let lin = Linearization::new(&path[k], params, linear)?;
            let top = tangential_part(&lin.cache, params, &path_velocity(path, dt, k))?;
            Ok(tangent_norm(&lin.cache, &top))
        })
        .collect()
}

/// Lift a path sampled at spacing `dt` to a horizontal one.
pub fn horizontal_lift(
    path: &[Immersion],
    dt: f64,
    params: &OperatorParams,
    linear: &LinearSolverOptions,
) -> Result<HorizontalLift> {
    check_path(path, dt)?;
    let grid = *path[0].grid();
    let zero = SeamShift::<Vector2<f64>>::zero();
    let mut phi: Vec<Vector2<f64>> = (0..grid.len())
        .map(|n| {
            let (u, v) = grid.position(n);
            Vector2::new(u, v)
        })
        .collect();
    let mut clamped = false;
    let mut xi = Vec::with_capacity(path.len());
    let mut positions = Vec::with_capacity(path.len());
    let mut lifted = Vec::with_capacity(path.len());
    for (k, f) in path.iter().enumerate() {
        let lin = Linearization::new(f, params, linear)?;
        let (_, ver) = lin.operator.horizontal_projection(&lin.cache, &path_velocity(path, dt, k))?;
        let xi_k = ver.scaled(-1.0);

        let mut pts = Vec::with_capacity(grid.len());
        for p in &phi {
            let (x, c) = grid.interpolate(f.points(), f.seam(), p[0], p[1]);
            clamped |= c;
            pts.push(x);
        }
        lifted.push(f.with_points(pts)?);
        positions.push(phi.clone());

        if k + 1 < path.len() {
            let xi_vals = xi_k.as_slice();
            phi = phi
                .iter()
                .map(|p| {
                    let (x, c) = grid.interpolate(xi_vals, &zero, p[0], p[1]);
                    clamped |= c;
                    p + x * dt
                })
                .collect();
        }
        xi.push(xi_k);
    }
    if clamped {
        log::warn!("horizontal lift left the parameter domain; positions were clamped");
    }
    Ok(HorizontalLift {
        xi,
        positions,
        lifted,
        clamped,
    })
}
