//! Right-hand sides of the momentum equations in flat ambient space.
//!
//! Every function returns a chart density, i.e. the pointwise value multiplied by
//! `√det g`, and vanishes on Dirichlet boundary nodes.

use nalgebra::{Matrix2, Vector2, Vector3};
use rayon::prelude::*;

use crate::error::Result;
use crate::field::{ScalarField, VectorField};
use crate::geometry::GeometryCache;
use crate::grid::SeamShift;
use crate::operator::OperatorParams;

/// Chart gradient `(∂_u h, ∂_v h)` of an ambient field (plain componentwise partials).
pub(crate) fn field_gradient(cache: &GeometryCache, h: &[Vector3<f64>]) -> (Vec<Vector3<f64>>, Vec<Vector3<f64>>) {
    cache.grid().gradient(h, &SeamShift::zero())
}

fn pairing(xu: &Vector3<f64>, xv: &Vector3<f64>, yu: &Vector3<f64>, yv: &Vector3<f64>) -> Matrix2<f64> {
    Matrix2::new(xu.dot(yu), xu.dot(yv), xv.dot(yu), xv.dot(yv))
}

/// `∇*ω = -(1/√det g) ∂_i(√det g · g^{ij} ω_j)` for a one-form given by chart components.
///
/// With central differences this is the exact adjoint of the nodal gradient in the
/// weighted product on a periodic grid.
pub fn adjoint_gradient(cache: &GeometryCache, omega: &[Vector2<f64>]) -> Vec<f64> {
    let (xu, xv): (Vec<f64>, Vec<f64>) = cache
        .nodes()
        .iter()
        .zip(omega)
        .map(|(geo, w)| {
            let raised = geo.g_inv * w * geo.sqrt_det;
            (raised[0], raised[1])
        })
        .unzip();
    cache
        .grid()
        .divergence(&xu, &xv)
        .into_iter()
        .zip(cache.nodes())
        .map(|(d, geo)| -d / geo.sqrt_det)
        .collect()
}

fn zero_boundary<T: Copy>(cache: &GeometryCache, vals: &mut [T], zero: T) {
    let grid = cache.grid();
    for (n, v) in vals.iter_mut().enumerate() {
        if grid.is_boundary_node(n) {
            *v = zero;
        }
    }
}

/// `∂_t b` for `p = 1` via the closed form
/// `[A g⁰₂(s, ⟨∇f_t, ∇f_t⟩) - ½ Tr L (|f_t|² + A |∇f_t|²)] √det g`.
pub fn scalar_momentum_rhs_p1(cache: &GeometryCache, params: &OperatorParams, f_t: &VectorField) -> Result<ScalarField> {
    f_t.check_len(cache.len())?;
    let a = params.a;
    let (du, dv) = field_gradient(cache, f_t.as_slice());
    let mut out: Vec<f64> = (0..cache.len())
        .into_par_iter()
        .map(|n| {
            let geo = cache.node(n);
            let b = pairing(&du[n], &dv[n], &du[n], &dv[n]);
            let g_inv = geo.g_inv;
            let curv = (g_inv * geo.s * g_inv * b).trace();
            let grad_sq = (g_inv * b).trace();
            (a * curv - 0.5 * geo.tr_l * (f_t[n].norm_squared() + a * grad_sq)) * geo.sqrt_det
        })
        .collect();
    zero_boundary(cache, &mut out, 0.0);
    Ok(ScalarField(out))
}

/// Powers `Δ^0 h, …, Δ^k h`.
fn laplacian_powers(cache: &GeometryCache, h: &VectorField, k: u32) -> Vec<Vec<Vector3<f64>>> {
    let mut pows = vec![h.as_slice().to_vec()];
    for _ in 0..k {
        let next = cache.laplacian().apply_vector(pows.last().expect("nonempty"));
        pows.push(next);
    }
    pows
}

/// Per-node ingredients shared by the scalar and vector forms of the general equation.
struct GeneralTerms {
    /// `Σ_i g⁻¹ B_i g⁻¹` (contract with `S` or `s`).
    weights: Vec<Matrix2<f64>>,
    /// `Σ_i ∇*ω_i`.
    adjoint: Vec<f64>,
    /// `P f_t`.
    pft: Vec<Vector3<f64>>,
}

fn general_terms(cache: &GeometryCache, params: &OperatorParams, f_t: &VectorField) -> GeneralTerms {
    let p = params.p as usize;
    let pows = laplacian_powers(cache, f_t, params.p);
    let grads: Vec<_> = pows[..p].iter().map(|h| field_gradient(cache, h)).collect();
    let n_nodes = cache.len();
    let mut weights = vec![Matrix2::zeros(); n_nodes];
    let mut adjoint = vec![0.0; n_nodes];
    for i in 0..p {
        let (xu, xv) = &grads[p - i - 1];
        let (yu, yv) = &grads[i];
        let y = &pows[i];
        let omega: Vec<Vector2<f64>> = (0..n_nodes).map(|n| Vector2::new(xu[n].dot(&y[n]), xv[n].dot(&y[n]))).collect();
        for (n, w) in weights.iter_mut().enumerate() {
            let g_inv = cache.node(n).g_inv;
            *w += g_inv * pairing(&xu[n], &xv[n], &yu[n], &yv[n]) * g_inv;
        }
        for (acc, d) in adjoint.iter_mut().zip(adjoint_gradient(cache, &omega)) {
            *acc += d;
        }
    }
    let pft = f_t
        .iter()
        .zip(&pows[p])
        .map(|(h, l)| h + l * params.a)
        .collect();
    GeneralTerms { weights, adjoint, pft }
}

/// `∂_t b` for any `p ≥ 1`:
/// `[A Σ_i Tr(g⁻¹ s g⁻¹ B_i) + (A/2) Σ_i (∇*ω_i) Tr L - ½ ⟨P f_t, f_t⟩ Tr L] √det g`
/// with `B_i = ⟨∇Δ^{p-i-1} f_t, ∇Δ^i f_t⟩` and `ω_i = ⟨∇Δ^{p-i-1} f_t, Δ^i f_t⟩`.
pub fn scalar_momentum_rhs_general(cache: &GeometryCache, params: &OperatorParams, f_t: &VectorField) -> Result<ScalarField> {
    f_t.check_len(cache.len())?;
    let a = params.a;
    let terms = general_terms(cache, params, f_t);
    let mut out: Vec<f64> = (0..cache.len())
        .map(|n| {
            let geo = cache.node(n);
            let curv = (geo.s.transpose() * terms.weights[n]).trace();
            let energy = terms.pft[n].dot(&f_t[n]);
            (a * curv + 0.5 * a * terms.adjoint[n] * geo.tr_l - 0.5 * energy * geo.tr_l) * geo.sqrt_det
        })
        .collect();
    zero_boundary(cache, &mut out, 0.0);
    Ok(ScalarField(out))
}

/// Time derivative of the vector momentum density `p = P f_t · √det g`:
/// `[A Σ Tr(g⁻¹ S g⁻¹ B_i) + (A/2) Σ (∇*ω_i) Tr^g S - ½ ⟨P f_t, f_t⟩ Tr^g S - Tf.(g⁻¹ η)] √det g`
/// with `η_j = ⟨P f_t, ∂_j f_t⟩`.
pub fn vector_momentum_rhs(cache: &GeometryCache, params: &OperatorParams, f_t: &VectorField) -> Result<VectorField> {
    f_t.check_len(cache.len())?;
    let a = params.a;
    let terms = general_terms(cache, params, f_t);
    let (du, dv) = field_gradient(cache, f_t.as_slice());
    let mut out: Vec<Vector3<f64>> = (0..cache.len())
        .map(|n| {
            let geo = cache.node(n);
            let w = &terms.weights[n];
            let mut curv = Vector3::zeros();
            for k in 0..2 {
                for l in 0..2 {
                    curv += geo.s_ij(k, l) * w[(l, k)];
                }
            }
            let h = geo.mean_curvature_vector();
            let pft = terms.pft[n];
            let eta = Vector2::new(pft.dot(&du[n]), pft.dot(&dv[n]));
            let tangential = geo.push_forward(&(geo.g_inv * eta));
            (curv * a + h * (0.5 * a * terms.adjoint[n] - 0.5 * pft.dot(&f_t[n])) - tangential) * geo.sqrt_det
        })
        .collect();
    zero_boundary(cache, &mut out, Vector3::zeros());
    Ok(VectorField(out))
}
