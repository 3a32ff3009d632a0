//! Discrete differential geometry of a grid immersion `f: M → ℝ³`.
//!
//! Pointwise quantities (metric, normal, second fundamental form, Christoffel symbols)
//! come from second-order finite differences of `f`. The Laplace–Beltrami operator is
//! assembled in divergence form from a per-cell quadratic form, so it is exactly
//! symmetric with respect to the lumped `H⁰` product `Σ_n m_n ⟨h_n, k_n⟩` with
//! `m_n = w_n · hu · hv · √det g_n`.
//!
//! Conventions: `ν = ∂_u f × ∂_v f / |…|`, the Laplacian is the positive (Bochner) one,
//! `s = ⟨S, ν⟩`, `L = g⁻¹ s` and `Tr L` is the mean curvature. With these signs a round
//! sphere parametrized so that `ν` points outward has `Tr L = -2/r`, and `Δf = -Tr^g(S)`.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use nalgebra::{Matrix2, Vector2, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{ScalarField, TangentField, VectorField};
use crate::grid::{Nodal, ParamGrid, SeamShift};
use crate::sparse::CsrMatrix;

/// Relative guard on `det g` below which a node counts as degenerate.
pub const DEGENERACY_RATIO: f64 = 1e-12;

/// A surface sampled on the nodes of a parameter grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Immersion {
    grid: ParamGrid,
    points: Vec<Vector3<f64>>,
    seam: SeamShift<Vector3<f64>>,
}

impl Immersion {
    pub fn new(grid: ParamGrid, points: Vec<Vector3<f64>>) -> Result<Self> {
        Self::with_seam(grid, points, SeamShift::zero())
    }

    /// Immersion whose values jump by `seam` across the periodic identification.
    pub fn with_seam(grid: ParamGrid, points: Vec<Vector3<f64>>, seam: SeamShift<Vector3<f64>>) -> Result<Self> {
        if points.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                found: points.len(),
            });
        }
        if points.iter().any(|p| !p.iter().all(|x| x.is_finite())) {
            return Err(Error::InvalidParameter("immersion contains non-finite coordinates".into()));
        }
        Ok(Immersion { grid, points, seam })
    }

    pub fn from_fn(grid: ParamGrid, f: impl Fn(f64, f64) -> Vector3<f64>) -> Result<Self> {
        let points = grid.sample(f);
        Self::new(grid, points)
    }

    /// `(u, v, 0)` on the grid; on a periodic grid the seam shift makes it a flat sheet.
    pub fn flat(grid: ParamGrid) -> Self {
        let points = grid.sample(|u, v| Vector3::new(u, v, 0.0));
        let seam = if grid.is_periodic() {
            let (lu, lv) = grid.extent();
            SeamShift {
                u: Vector3::new(lu, 0.0, 0.0),
                v: Vector3::new(0.0, lv, 0.0),
            }
        } else {
            SeamShift::zero()
        };
        Immersion { grid, points, seam }
    }

    /// Torus of revolution with tube radius `r` around a circle of radius `big_r`
    /// on a periodic grid over `[0, 2π)²` (`u` around the tube axis, `v` around the tube).
    pub fn torus(grid: ParamGrid, big_r: f64, r: f64) -> Result<Self> {
        Self::from_fn(grid, |u, v| {
            let rho = big_r + r * v.cos();
            Vector3::new(rho * u.cos(), rho * u.sin(), r * v.sin())
        })
    }

    /// Patch of the sphere of radius `r` in polar/azimuth coordinates `(θ, φ)`,
    /// oriented so that `ν` points outward.
    pub fn sphere_patch(grid: ParamGrid, r: f64) -> Result<Self> {
        Self::from_fn(grid, |theta, phi| {
            Vector3::new(r * theta.sin() * phi.cos(), r * theta.sin() * phi.sin(), r * theta.cos())
        })
    }

    pub fn grid(&self) -> &ParamGrid {
        &self.grid
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn seam(&self) -> &SeamShift<Vector3<f64>> {
        &self.seam
    }

    pub fn into_points(self) -> Vec<Vector3<f64>> {
        self.points
    }

    /// Same grid and seam, new node positions.
    pub fn with_points(&self, points: Vec<Vector3<f64>>) -> Result<Self> {
        Self::with_seam(self.grid, points, self.seam)
    }

    /// `f + alpha * h`
    pub fn displaced(&self, h: &VectorField, alpha: f64) -> Result<Self> {
        h.check_len(self.grid.len())?;
        let points = self.points.iter().zip(h.iter()).map(|(p, d)| p + d * alpha).collect();
        self.with_points(points)
    }

    /// Uniform scaling about the origin.
    pub fn scaled(&self, factor: f64) -> Self {
        Immersion {
            grid: self.grid,
            points: self.points.iter().map(|p| p * factor).collect(),
            seam: SeamShift {
                u: self.seam.u * factor,
                v: self.seam.v * factor,
            },
        }
    }

    /// Hash of the exact node coordinates; used to detect stale operator caches.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for p in &self.points {
            for x in p.iter() {
                x.to_bits().hash(&mut h);
            }
        }
        for x in self.seam.u.iter().chain(self.seam.v.iter()) {
            x.to_bits().hash(&mut h);
        }
        h.finish()
    }
}

/// Derived geometry at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeGeometry {
    pub f_u: Vector3<f64>,
    pub f_v: Vector3<f64>,
    /// Pullback metric `g_ij = ⟨∂_i f, ∂_j f⟩`.
    pub g: Matrix2<f64>,
    pub g_inv: Matrix2<f64>,
    /// Volume density coefficient `√det g`.
    pub sqrt_det: f64,
    /// `christoffel[k][i][j] = Γ^k_ij`.
    pub christoffel: [[[f64; 2]; 2]; 2],
    /// Second fundamental form `[S_uu, S_uv, S_vv]`.
    pub second_form: [Vector3<f64>; 3],
    pub normal: Vector3<f64>,
    /// Scalar second fundamental form `s = ⟨S, ν⟩`.
    pub s: Matrix2<f64>,
    /// Weingarten map `L = g⁻¹ s`.
    pub weingarten: Matrix2<f64>,
    /// Mean curvature `Tr L`.
    pub tr_l: f64,
}

impl NodeGeometry {
    /// `Tf.X = X^u ∂_u f + X^v ∂_v f`
    pub fn push_forward(&self, x: &Vector2<f64>) -> Vector3<f64> {
        self.f_u * x[0] + self.f_v * x[1]
    }

    /// `Tf^T h = (⟨h, ∂_u f⟩, ⟨h, ∂_v f⟩)`
    pub fn pull_back(&self, h: &Vector3<f64>) -> Vector2<f64> {
        Vector2::new(h.dot(&self.f_u), h.dot(&self.f_v))
    }

    /// `S_ij` as a symmetric 2×2 array of ambient vectors.
    pub fn s_ij(&self, i: usize, j: usize) -> Vector3<f64> {
        match (i, j) {
            (0, 0) => self.second_form[0],
            (1, 1) => self.second_form[2],
            _ => self.second_form[1],
        }
    }

    /// Vector mean curvature `Tr^g(S) = g^{ij} S_ij`.
    pub fn mean_curvature_vector(&self) -> Vector3<f64> {
        let gi = &self.g_inv;
        self.second_form[0] * gi[(0, 0)] + self.second_form[1] * (2.0 * gi[(0, 1)]) + self.second_form[2] * gi[(1, 1)]
    }
}

/// Divergence-form Laplace–Beltrami operator `Δ = M⁻¹ K` on a fixed immersion.
#[derive(Debug, Clone)]
pub struct Laplacian {
    stiffness: CsrMatrix,
    mass: Vec<f64>,
    free: Vec<usize>,
    boundary: Vec<bool>,
}

impl Laplacian {
    fn assemble(f: &Immersion, nodes: &[NodeGeometry]) -> Result<Self> {
        let grid = f.grid();
        let (nu, nv) = (grid.nu(), grid.nv());
        let (hu, hv) = (grid.hu(), grid.hv());
        let (cu, cv) = if grid.is_periodic() { (nu, nv) } else { (nu - 1, nv - 1) };
        let pts = f.points();
        let seam = f.seam();

        // edge functionals over corners [00, 10, 01, 11]
        let x1 = [-1.0 / hu, 1.0 / hu, 0.0, 0.0];
        let x2 = [0.0, 0.0, -1.0 / hu, 1.0 / hu];
        let y1 = [-1.0 / hv, 0.0, 1.0 / hv, 0.0];
        let y2 = [0.0, -1.0 / hv, 0.0, 1.0 / hv];
        let du: [f64; 4] = std::array::from_fn(|k| 0.5 * (x1[k] + x2[k]));
        let dv: [f64; 4] = std::array::from_fn(|k| 0.5 * (y1[k] + y2[k]));

        let cells: Vec<(usize, usize)> = (0..cv).flat_map(|j| (0..cu).map(move |i| (i, j))).collect();
        let locals: Vec<Result<([usize; 4], [[f64; 4]; 4])>> = cells
            .par_iter()
            .map(|&(i, j)| {
                let p = |di: isize, dj: isize| grid.neighbor(pts, seam, i, j, di, dj);
                let (p00, p10, p01, p11) = (p(0, 0), p(1, 0), p(0, 1), p(1, 1));
                let fu = ((p10 - p00) + (p11 - p01)) * (0.5 / hu);
                let fv = ((p01 - p00) + (p11 - p10)) * (0.5 / hv);
                let g = Matrix2::new(fu.dot(&fu), fu.dot(&fv), fu.dot(&fv), fv.dot(&fv));
                let det = g.determinant();
                if !(det > 0.0) || !det.is_finite() {
                    return Err(Error::DegenerateImmersion { i, j, det, threshold: 0.0 });
                }
                let a = Matrix2::new(g[(1, 1)], -g[(0, 1)], -g[(1, 0)], g[(0, 0)]) * (hu * hv / det.sqrt());
                let mut k = [[0.0; 4]; 4];
                for r in 0..4 {
                    for c in 0..4 {
                        k[r][c] = 0.5 * a[(0, 0)] * (x1[r] * x1[c] + x2[r] * x2[c])
                            + 0.5 * a[(1, 1)] * (y1[r] * y1[c] + y2[r] * y2[c])
                            + a[(0, 1)] * (du[r] * dv[c] + dv[r] * du[c]);
                    }
                }
                let wrap = |ii: usize, jj: usize| grid.index(ii % nu, jj % nv);
                let idx = [wrap(i, j), wrap(i + 1, j), wrap(i, j + 1), wrap(i + 1, j + 1)];
                Ok((idx, k))
            })
            .collect();

        let mut triplets = Vec::with_capacity(16 * cells.len());
        for local in locals {
            let (idx, k) = local?;
            for r in 0..4 {
                for c in 0..4 {
                    triplets.push((idx[r], idx[c], k[r][c]));
                }
            }
        }
        let stiffness = CsrMatrix::from_triplets(grid.len(), triplets);
        let mass = (0..grid.len())
            .map(|n| grid.quadrature_weight(n) * grid.cell_area() * nodes[n].sqrt_det)
            .collect();
        let boundary = (0..grid.len()).map(|n| grid.is_boundary_node(n)).collect();
        Ok(Laplacian {
            stiffness,
            mass,
            free: grid.free_nodes(),
            boundary,
        })
    }

    /// Stiffness matrix `K` over all nodes (`φᵀ K ψ ≈ ∫ g(grad φ, grad ψ) vol(g)`).
    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    /// Lumped mass `m_n = w_n hu hv √det g_n`.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Nodes carrying unknowns (interior nodes on a Dirichlet grid).
    pub fn free_nodes(&self) -> &[usize] {
        &self.free
    }

    pub fn is_boundary(&self, n: usize) -> bool {
        self.boundary[n]
    }

    /// `Δφ` for a scalar field; zero on Dirichlet boundary nodes.
    pub fn apply_scalar(&self, phi: &[f64]) -> Vec<f64> {
        let mut y = self.stiffness.apply(phi);
        for (n, yn) in y.iter_mut().enumerate() {
            *yn = if self.boundary[n] { 0.0 } else { *yn / self.mass[n] };
        }
        y
    }

    /// Componentwise `Δh`; zero on Dirichlet boundary nodes.
    pub fn apply_vector(&self, h: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
        (0..h.len())
            .into_par_iter()
            .map(|n| {
                if self.boundary[n] {
                    return Vector3::zeros();
                }
                let mut acc = Vector3::zeros();
                for (c, w) in self.stiffness.row(n) {
                    acc += h[c] * w;
                }
                acc / self.mass[n]
            })
            .collect()
    }
}

/// All derived geometry of one immersion.
#[derive(Debug, Clone)]
pub struct GeometryCache {
    immersion: Immersion,
    nodes: Vec<NodeGeometry>,
    laplacian: Laplacian,
}

impl GeometryCache {
    pub fn immersion(&self) -> &Immersion {
        &self.immersion
    }

    pub fn grid(&self) -> &ParamGrid {
        self.immersion.grid()
    }

    pub fn nodes(&self) -> &[NodeGeometry] {
        &self.nodes
    }

    pub fn node(&self, n: usize) -> &NodeGeometry {
        &self.nodes[n]
    }

    pub fn laplacian(&self) -> &Laplacian {
        &self.laplacian
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn normals(&self) -> VectorField {
        VectorField(self.nodes.iter().map(|g| g.normal).collect())
    }

    pub fn sqrt_det(&self) -> ScalarField {
        ScalarField(self.nodes.iter().map(|g| g.sqrt_det).collect())
    }

    /// `Tf.X` as an ambient field.
    pub fn push_forward(&self, x: &TangentField) -> VectorField {
        VectorField(self.nodes.iter().zip(x.iter()).map(|(g, x)| g.push_forward(x)).collect())
    }

    /// `Vol(f) = ∫_M vol(g)`.
    pub fn volume(&self) -> f64 {
        self.laplacian.mass.iter().sum()
    }

    pub fn fingerprint(&self) -> u64 {
        self.immersion.fingerprint()
    }
}

fn node_metric(f_u: &Vector3<f64>, f_v: &Vector3<f64>) -> Matrix2<f64> {
    let guv = f_u.dot(f_v);
    Matrix2::new(f_u.norm_squared(), guv, guv, f_v.norm_squared())
}

fn degeneracy_threshold(dets: &[f64]) -> f64 {
    let mut sorted: Vec<f64> = dets.iter().copied().filter(|d| d.is_finite()).collect();
    if sorted.is_empty() {
        return f64::INFINITY;
    }
    sorted.sort_by(f64::total_cmp);
    DEGENERACY_RATIO * sorted[sorted.len() / 2].max(0.0)
}

fn check_nondegenerate(grid: &ParamGrid, dets: &[f64]) -> Result<()> {
    let threshold = degeneracy_threshold(dets);
    for (n, &det) in dets.iter().enumerate() {
        if !(det > threshold) {
            let (i, j) = grid.coords(n);
            return Err(Error::DegenerateImmersion { i, j, det, threshold });
        }
    }
    Ok(())
}

/// Pullback metric `g_ij = ⟨∂_i f, ∂_j f⟩` at every node.
///
/// Fails when `det g ≤ 1e-12 · median(det g)` anywhere.
pub fn pullback_metric(f: &Immersion) -> Result<Vec<Matrix2<f64>>> {
    let grid = f.grid();
    let (fu, fv) = grid.gradient(f.points(), f.seam());
    let g: Vec<Matrix2<f64>> = fu.iter().zip(&fv).map(|(a, b)| node_metric(a, b)).collect();
    let dets: Vec<f64> = g.iter().map(|m| m.determinant()).collect();
    check_nondegenerate(grid, &dets)?;
    Ok(g)
}

/// Compute every derived quantity of `f`, including the assembled Laplacian.
pub fn build_geometry(f: &Immersion) -> Result<GeometryCache> {
    let grid = *f.grid();
    let pts = f.points();
    let seam = f.seam();
    let (fu, fv) = grid.gradient(pts, seam);
    let dets: Vec<f64> = fu.iter().zip(&fv).map(|(a, b)| node_metric(a, b).determinant()).collect();
    check_nondegenerate(&grid, &dets)?;

    let zero = SeamShift::<Vector3<f64>>::zero();
    let nodes: Vec<NodeGeometry> = (0..grid.len())
        .into_par_iter()
        .map(|n| {
            let (i, j) = grid.coords(n);
            let f_u = fu[n];
            let f_v = fv[n];
            let f_uu = grid.d_uu(pts, seam, i, j);
            let f_vv = grid.d_vv(pts, seam, i, j);
            let f_uv = (grid.d_v(&fu, &zero, i, j) + grid.d_u(&fv, &zero, i, j)) * 0.5;
            let g = node_metric(&f_u, &f_v);
            let det = g.determinant();
            let g_inv = Matrix2::new(g[(1, 1)], -g[(0, 1)], -g[(1, 0)], g[(0, 0)]) / det;
            let tangents = [f_u, f_v];
            let second = [[f_uu, f_uv], [f_uv, f_vv]];
            // flat ambient: Γ^k_ij = g^{kl} ⟨∂_ij f, ∂_l f⟩ (Koszul formula with ∂g expanded)
            let mut christoffel = [[[0.0; 2]; 2]; 2];
            for a in 0..2 {
                for b in 0..2 {
                    let proj = Vector2::new(second[a][b].dot(&tangents[0]), second[a][b].dot(&tangents[1]));
                    let gamma = g_inv * proj;
                    christoffel[0][a][b] = gamma[0];
                    christoffel[1][a][b] = gamma[1];
                }
            }
            let s_ab = |a: usize, b: usize| {
                second[a][b] - f_u * christoffel[0][a][b] - f_v * christoffel[1][a][b]
            };
            let second_form = [s_ab(0, 0), s_ab(0, 1), s_ab(1, 1)];
            let normal = f_u.cross(&f_v).normalize();
            let s = Matrix2::new(
                second_form[0].dot(&normal),
                second_form[1].dot(&normal),
                second_form[1].dot(&normal),
                second_form[2].dot(&normal),
            );
            let weingarten = g_inv * s;
            NodeGeometry {
                f_u,
                f_v,
                g,
                g_inv,
                sqrt_det: det.sqrt(),
                christoffel,
                second_form,
                normal,
                s,
                weingarten,
                tr_l: weingarten.trace(),
            }
        })
        .collect();
    let laplacian = Laplacian::assemble(f, &nodes)?;
    Ok(GeometryCache {
        immersion: f.clone(),
        nodes,
        laplacian,
    })
}

/// Componentwise Laplace–Beltrami operator (positive sign convention).
pub fn laplace_beltrami(cache: &GeometryCache, h: &VectorField) -> Result<VectorField> {
    h.check_len(cache.len())?;
    Ok(VectorField(cache.laplacian.apply_vector(h.as_slice())))
}

/// Split `h = Tf.h_top + h_perp` with `h_perp ⟂ Tf`.
pub fn split_tangent_normal(cache: &GeometryCache, h: &VectorField) -> Result<(TangentField, VectorField)> {
    h.check_len(cache.len())?;
    let (top, perp) = cache
        .nodes
        .iter()
        .zip(h.iter())
        .map(|(geo, h)| {
            let x = geo.g_inv * geo.pull_back(h);
            (x, h - geo.push_forward(&x))
        })
        .unzip();
    Ok((TangentField(top), VectorField(perp)))
}

/// `H⁰_f(h, k) = ∫ ⟨h, k⟩ vol(g)` with trapezoidal (Dirichlet) or rectangle (periodic) weights.
pub fn h0_inner(cache: &GeometryCache, h: &VectorField, k: &VectorField) -> Result<f64> {
    h.check_len(cache.len())?;
    k.check_len(cache.len())?;
    Ok(cache
        .laplacian
        .mass
        .iter()
        .zip(h.iter().zip(k.iter()))
        .map(|(m, (a, b))| m * a.dot(b))
        .sum())
}

/// Weighted scalar integral `∫ φ vol(g)`.
pub fn integrate_scalar(cache: &GeometryCache, phi: &[f64]) -> f64 {
    cache.laplacian.mass.iter().zip(phi).map(|(m, p)| m * p).sum()
}

/// Integral of a nodal quantity against `vol(g)`.
pub fn integrate<T: Nodal>(cache: &GeometryCache, vals: &[T]) -> T {
    cache
        .laplacian
        .mass
        .iter()
        .zip(vals)
        .fold(T::zero(), |acc, (m, v)| acc + *v * *m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;
    use std::f64::consts::PI;

    fn dist(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
        (a - b).norm()
    }

    #[test]
    fn flat_chart_has_identity_metric() {
        let f = Immersion::flat(ParamGrid::square(9).unwrap());
        for g in pullback_metric(&f).unwrap() {
            assert!((g - Matrix2::identity()).norm() < 1e-12);
        }
    }

    #[test]
    fn tilted_plane_metric_and_normal() {
        let grid = ParamGrid::dirichlet(7, 6, (0.0, 1.0), (0.0, 1.0)).unwrap();
        let f = Immersion::from_fn(grid, |u, v| Vector3::new(u, v, u)).unwrap();
        for g in pullback_metric(&f).unwrap() {
            assert!((g - Matrix2::new(2.0, 0.0, 0.0, 1.0)).norm() < 1e-12);
        }
        let cache = build_geometry(&f).unwrap();
        let expected = Vector3::new(-1.0, 0.0, 1.0) / 2f64.sqrt();
        for node in cache.nodes() {
            assert!(dist(&node.normal, &expected) < 1e-12);
            assert!(node.tr_l.abs() < 1e-9);
        }
    }

    #[test]
    fn flat_plane_has_no_curvature() {
        let cache = build_geometry(&Immersion::flat(ParamGrid::square(8).unwrap())).unwrap();
        for node in cache.nodes() {
            assert!(node.s.norm() < 1e-12);
            assert!(node.weingarten.norm() < 1e-12);
            assert!(node.second_form.iter().all(|v| v.norm() < 1e-12));
            assert!(dist(&node.normal, &Vector3::z()) < 1e-15);
        }
    }

    #[test]
    fn degenerate_immersion_is_rejected() {
        let grid = ParamGrid::square(6).unwrap();
        let collapsed = Immersion::from_fn(grid, |u, _| Vector3::new(u, 0.0, 0.0)).unwrap();
        assert!(matches!(pullback_metric(&collapsed), Err(Error::DegenerateImmersion { .. })));
        assert!(build_geometry(&collapsed).is_err());
    }

    #[test]
    fn constants_are_harmonic() {
        let grid = ParamGrid::dirichlet(12, 10, (0.2, 1.4), (0.4, 1.2)).unwrap();
        let f = Immersion::sphere_patch(grid, 2.0).unwrap();
        let cache = build_geometry(&f).unwrap();
        let h = VectorField(vec![Vector3::new(1.0, -2.0, 0.5); grid.len()]);
        let lap = laplace_beltrami(&cache, &h).unwrap();
        assert!(lap.max_abs() < 1e-10);
    }

    #[test]
    fn flat_eigenfunction() {
        let n = 41;
        let cache = build_geometry(&Immersion::flat(ParamGrid::square(n).unwrap())).unwrap();
        let h = VectorField(cache.grid().sample(|u, v| Vector3::z() * (u.sin() * v.sin())));
        let lap = laplace_beltrami(&cache, &h).unwrap();
        let err = lap.sub(&h.scaled(2.0)).max_abs();
        let hstep = PI / (n - 1) as f64;
        assert!(err < hstep * hstep, "err {err}");
    }

    #[test]
    fn split_reconstructs() {
        let grid = ParamGrid::periodic(16, 12, (0.0, 2.0 * PI), (0.0, 2.0 * PI)).unwrap();
        let f = Immersion::torus(grid, 3.0, 1.0).unwrap();
        let cache = build_geometry(&f).unwrap();
        let h = VectorField(grid.sample(|u, v| Vector3::new(u.sin(), (u + v).cos(), 0.3 * v)));
        let (top, perp) = split_tangent_normal(&cache, &h).unwrap();
        let rebuilt = cache.push_forward(&top).add(&perp);
        assert!(rebuilt.sub(&h).norm() <= 1e-12 * h.norm());
        for (node, p) in cache.nodes().iter().zip(perp.iter()) {
            assert!(p.dot(&node.f_u).abs() < 1e-12 && p.dot(&node.f_v).abs() < 1e-12);
        }
        let (top, perp) = split_tangent_normal(&cache, &cache.normals()).unwrap();
        assert!(top.max_abs() < 1e-12);
        assert!(perp.sub(&cache.normals()).max_abs() < 1e-12);
        let fu = VectorField(cache.nodes().iter().map(|g| g.f_u).collect());
        let (top, perp) = split_tangent_normal(&cache, &fu).unwrap();
        assert!(top.iter().all(|x| (x - Vector2::new(1.0, 0.0)).norm() < 1e-12));
        assert!(perp.max_abs() < 1e-12);
    }

    #[test]
    fn h0_inner_basics() {
        let cache = build_geometry(&Immersion::flat(ParamGrid::square(33).unwrap())).unwrap();
        let ez = VectorField(vec![Vector3::z(); cache.len()]);
        assert!((h0_inner(&cache, &ez, &ez).unwrap() - PI * PI).abs() < 1e-12);
        let ex = VectorField(vec![Vector3::x(); cache.len()]);
        assert_eq!(h0_inner(&cache, &ez, &ex).unwrap(), 0.0);
        assert!(h0_inner(&cache, &ez, &VectorField::zeros(3)).is_err());
        assert_eq!(cache.grid().boundary(), Boundary::DirichletZero);
    }

    fn sphere_cache(n: usize, r: f64) -> GeometryCache {
        let grid = ParamGrid::dirichlet(n, n, (0.6, 2.2), (0.3, 1.9)).unwrap();
        build_geometry(&Immersion::sphere_patch(grid, r).unwrap()).unwrap()
    }

    /// Max error over nodes at least a quarter of the domain away from the boundary.
    fn interior_max(cache: &GeometryCache, err: impl Fn(usize) -> f64) -> f64 {
        let grid = cache.grid();
        (0..grid.len())
            .filter(|&n| {
                let (i, j) = grid.coords(n);
                4 * i >= grid.nu() && 4 * i <= 3 * grid.nu() && 4 * j >= grid.nv() && 4 * j <= 3 * grid.nv()
            })
            .map(err)
            .fold(0.0, f64::max)
    }

    #[test]
    fn sphere_mean_curvature_converges() {
        let r = 1.5;
        let errs: Vec<f64> = [17, 33, 65]
            .iter()
            .map(|&n| {
                let c = sphere_cache(n, r);
                interior_max(&c, |k| (c.node(k).tr_l + 2.0 / r).abs())
            })
            .collect();
        assert!(errs[2] < 1e-3, "{errs:?}");
        assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5, "{errs:?}");
    }

    #[test]
    fn sphere_normal_is_outward_and_orthogonal() {
        let c = sphere_cache(33, 2.0);
        for (node, p) in c.nodes().iter().zip(c.immersion().points()) {
            assert!((node.normal.norm() - 1.0).abs() < 1e-14);
            assert!(node.normal.dot(&node.f_u).abs() < 1e-12 && node.normal.dot(&node.f_v).abs() < 1e-12);
            assert!((node.normal - p / 2.0).norm() < 1e-2);
            assert!((node.g * node.g_inv - Matrix2::identity()).norm() < 1e-12);
            assert!(node.s[(0, 1)] == node.s[(1, 0)]);
        }
    }

    #[test]
    fn sphere_laplacian_of_normal_and_position() {
        let r = 1.5;
        let errs: Vec<(f64, f64)> = [17, 33, 65]
            .iter()
            .map(|&n| {
                let c = sphere_cache(n, r);
                let lap_nu = laplace_beltrami(&c, &c.normals()).unwrap();
                let f = VectorField(c.immersion().points().to_vec());
                let lap_f = laplace_beltrami(&c, &f).unwrap();
                let e_nu = interior_max(&c, |k| (lap_nu[k] - c.node(k).normal * (2.0 / (r * r))).norm());
                let e_f = interior_max(&c, |k| (lap_f[k] + c.node(k).mean_curvature_vector()).norm());
                (e_nu, e_f)
            })
            .collect();
        let (e_nu, e_f) = errs[2];
        assert!(e_nu < 1e-2 && e_f < 1e-2, "{errs:?}");
        assert!(errs[1].0 / errs[2].0 > 3.0 && errs[1].1 / errs[2].1 > 3.0, "{errs:?}");
    }

    #[test]
    fn sine_graph_metric_matches_symbolic() {
        for n in [21, 41] {
            let grid = ParamGrid::square(n).unwrap();
            let f = Immersion::from_fn(grid, |u, v| Vector3::new(u, v, u.sin())).unwrap();
            let g = pullback_metric(&f).unwrap();
            let h = grid.hu();
            for (k, gk) in g.iter().enumerate() {
                let (u, _) = grid.position(k);
                assert!((gk[(0, 0)] - (1.0 + u.cos().powi(2))).abs() < h * h);
                assert!(gk[(0, 1)].abs() < 1e-14 && (gk[(1, 1)] - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn stiffness_is_symmetric() {
        let grid = ParamGrid::periodic(10, 8, (0.0, 2.0 * PI), (0.0, 2.0 * PI)).unwrap();
        let cache = build_geometry(&Immersion::torus(grid, 2.5, 1.0).unwrap()).unwrap();
        assert!(cache.laplacian().stiffness().asymmetry() < 1e-14);
    }
}
