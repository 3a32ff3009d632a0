//! The elliptic operator `P = 1 + AΔ^p`, its inverse, and the tangential operator `P^⊤`.
//!
//! On the free nodes `P` is represented by the symmetric positive definite matrix
//! `S = M + A·K (M⁻¹K)^{p-1}`, which satisfies `S h = M (P h)` for fields vanishing on
//! the Dirichlet boundary. The same scalar matrix acts on each Cartesian component.
//! The tangential operator is represented by `Q = Tᵀ S T`, whose 2×2 node blocks are
//! `S_nm · T_nᵀ T_m` with `T_n = [∂_u f, ∂_v f]`. Tangential unknowns are held at zero on
//! a Dirichlet boundary.

use std::sync::OnceLock;

use nalgebra::{Vector2, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{TangentField, VectorField};
use crate::geometry::{h0_inner, GeometryCache};
use crate::sparse::{pcg, BandCholesky, CsrMatrix};

/// Weight `A ≥ 0` and order `p ≥ 1` of `P = 1 + AΔ^p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorParams {
    pub a: f64,
    pub p: u32,
}

impl OperatorParams {
    pub fn new(a: f64, p: u32) -> Result<Self> {
        let params = OperatorParams { a, p };
        params.validate()?;
        Ok(params)
    }

    /// `A = 0`: the plain `H⁰` metric.
    pub fn h0() -> Self {
        OperatorParams { a: 0.0, p: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a >= 0.0) || !self.a.is_finite() {
            return Err(Error::InvalidParameter(format!("A must be finite and >= 0, got {}", self.a)));
        }
        if self.p < 1 {
            return Err(Error::InvalidParameter("p must be >= 1".into()));
        }
        Ok(())
    }
}

impl Default for OperatorParams {
    fn default() -> Self {
        OperatorParams { a: 1.0, p: 1 }
    }
}

/// Numerics of the linear solves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSolverOptions {
    /// Relative residual target `‖P h − rhs‖ ≤ tol ‖rhs‖` for iterative solves.
    pub tol: f64,
    /// Iteration cap; `None` means ten times the number of unknowns.
    pub max_iter: Option<usize>,
    /// Band Cholesky is used when `n · bandwidth²` stays below this.
    pub direct_cost_limit: f64,
}

impl Default for LinearSolverOptions {
    fn default() -> Self {
        LinearSolverOptions {
            tol: 1e-10,
            max_iter: None,
            direct_cost_limit: 5e8,
        }
    }
}

impl LinearSolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        LinearSolverOptions {
            tol,
            ..Self::default()
        }
    }

    /// Never factor; always iterate (useful for testing the iterative path).
    pub fn iterative(tol: f64) -> Self {
        LinearSolverOptions {
            tol,
            max_iter: None,
            direct_cost_limit: 0.0,
        }
    }
}

/// `h + A Δ^p h`, with `Δ` applied `p` times.
pub fn apply_p(cache: &GeometryCache, params: &OperatorParams, h: &VectorField) -> Result<VectorField> {
    h.check_len(cache.len())?;
    if params.a == 0.0 {
        return Ok(h.clone());
    }
    let lap = cache.laplacian();
    let mut acc = h.as_slice().to_vec();
    for _ in 0..params.p {
        acc = lap.apply_vector(&acc);
    }
    let mut out = h.clone();
    out.axpy(params.a, &VectorField(acc));
    Ok(out)
}

/// `G^P_f(h, k) = ∫ ⟨P h, k⟩ vol(g)`.
pub fn gp_inner(cache: &GeometryCache, params: &OperatorParams, h: &VectorField, k: &VectorField) -> Result<f64> {
    h0_inner(cache, &apply_p(cache, params, h)?, k)
}

#[derive(Debug, Clone)]
enum Factor {
    Direct(BandCholesky),
    Iterative { diag: Vec<f64> },
}

/// An SPD system with its factorization or preconditioner.
#[derive(Debug, Clone)]
struct SpdSystem {
    matrix: CsrMatrix,
    factor: Factor,
    /// Residual weights for the iterative stopping test.
    weights: Vec<f64>,
    tol: f64,
    max_iter: usize,
}

impl SpdSystem {
    fn new(matrix: CsrMatrix, weights: Vec<f64>, opts: &LinearSolverOptions) -> Result<Self> {
        let n = matrix.dim();
        let factor = if BandCholesky::cost(n, matrix.bandwidth()) <= opts.direct_cost_limit {
            Factor::Direct(BandCholesky::factor(&matrix)?)
        } else {
            let diag = matrix.diagonal();
            if let Some((row, &pivot)) = diag.iter().enumerate().find(|(_, d)| !(**d > 0.0)) {
                return Err(Error::NotPositiveDefinite { row, pivot });
            }
            Factor::Iterative { diag }
        };
        Ok(SpdSystem {
            matrix,
            factor,
            weights,
            tol: opts.tol,
            max_iter: opts.max_iter.unwrap_or(10 * n.max(1)),
        })
    }

    fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        match &self.factor {
            Factor::Direct(chol) => {
                let mut x = b.to_vec();
                chol.solve_in_place(&mut x);
                Ok(x)
            }
            Factor::Iterative { diag } => {
                let mut x = vec![0.0; b.len()];
                pcg(
                    |v, out| self.matrix.matvec(v, out),
                    diag,
                    b,
                    &mut x,
                    Some(&self.weights),
                    self.tol,
                    self.max_iter,
                )?;
                Ok(x)
            }
        }
    }

    fn is_direct(&self) -> bool {
        matches!(self.factor, Factor::Direct(_))
    }
}

/// `P` assembled at one immersion, ready to be inverted.
#[derive(Debug)]
pub struct AssembledOperator {
    params: OperatorParams,
    opts: LinearSolverOptions,
    fingerprint: u64,
    node_count: usize,
    free: Vec<usize>,
    system: SpdSystem,
    tangential: OnceLock<SpdSystem>,
}

impl AssembledOperator {
    pub fn assemble(cache: &GeometryCache, params: &OperatorParams, opts: &LinearSolverOptions) -> Result<Self> {
        params.validate()?;
        let lap = cache.laplacian();
        let free = cache.grid().banded_order();
        let mass: Vec<f64> = free.iter().map(|&n| lap.mass()[n]).collect();
        let m = CsrMatrix::identity_scaled(&mass);
        let matrix = if params.a == 0.0 {
            m
        } else {
            let k = lap.stiffness().submatrix(&free);
            let inv_mass: Vec<f64> = mass.iter().map(|m| 1.0 / m).collect();
            let mut kp = k.clone();
            for _ in 1..params.p {
                kp = kp.mul(&k.scale_rows(&inv_mass));
            }
            m.add_scaled(1.0, &kp, params.a)
        };
        let weights = mass.iter().map(|m| 1.0 / m).collect();
        let system = SpdSystem::new(matrix, weights, opts)?;
        Ok(AssembledOperator {
            params: *params,
            opts: *opts,
            fingerprint: cache.fingerprint(),
            node_count: cache.len(),
            free,
            system,
            tangential: OnceLock::new(),
        })
    }

    pub fn params(&self) -> &OperatorParams {
        &self.params
    }

    /// The SPD matrix `S = M P` on the free nodes.
    pub fn matrix(&self) -> &CsrMatrix {
        &self.system.matrix
    }

    pub fn uses_direct_solver(&self) -> bool {
        self.system.is_direct()
    }

    /// Fingerprint of the immersion this operator was built from.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    fn check(&self, cache: &GeometryCache) -> Result<()> {
        if cache.fingerprint() != self.fingerprint || cache.len() != self.node_count {
            return Err(Error::StaleOperator);
        }
        Ok(())
    }

    pub fn apply_p(&self, cache: &GeometryCache, h: &VectorField) -> Result<VectorField> {
        self.check(cache)?;
        apply_p(cache, &self.params, h)
    }

    pub fn gp_inner(&self, cache: &GeometryCache, h: &VectorField, k: &VectorField) -> Result<f64> {
        self.check(cache)?;
        gp_inner(cache, &self.params, h, k)
    }

    /// Solve `P h = rhs`. Boundary values of `h` equal those of `rhs`.
    pub fn solve_p(&self, cache: &GeometryCache, rhs: &VectorField) -> Result<VectorField> {
        self.check(cache)?;
        rhs.check_len(cache.len())?;
        let lap = cache.laplacian();
        let mut h = VectorField::zeros(cache.len());
        let mut has_boundary = false;
        for n in 0..cache.len() {
            if lap.is_boundary(n) && rhs[n] != Vector3::zeros() {
                h[n] = rhs[n];
                has_boundary = true;
            }
        }
        let residual = if has_boundary {
            rhs.sub(&apply_p(cache, &self.params, &h)?)
        } else {
            rhs.clone()
        };
        let mass = lap.mass();
        let solutions = (0..3)
            .into_par_iter()
            .map(|c| {
                let b: Vec<f64> = self.free.iter().map(|&n| mass[n] * residual[n][c]).collect();
                self.system.solve(&b)
            })
            .collect::<Result<Vec<_>>>()?;
        for (i, &n) in self.free.iter().enumerate() {
            h[n] = Vector3::new(solutions[0][i], solutions[1][i], solutions[2][i]);
        }
        Ok(h)
    }

    fn tangential_system(&self, cache: &GeometryCache) -> Result<&SpdSystem> {
        if let Some(q) = self.tangential.get() {
            return Ok(q);
        }
        let s = &self.system.matrix;
        let nodes = cache.nodes();
        let mut triplets = Vec::with_capacity(4 * s.nnz());
        for (i, &n) in self.free.iter().enumerate() {
            let tn = [nodes[n].f_u, nodes[n].f_v];
            for (j, snm) in s.row(i) {
                let m = self.free[j];
                let tm = [nodes[m].f_u, nodes[m].f_v];
                for a in 0..2 {
                    for b in 0..2 {
                        triplets.push((2 * i + a, 2 * j + b, snm * tn[a].dot(&tm[b])));
                    }
                }
            }
        }
        let q = CsrMatrix::from_triplets(2 * self.free.len(), triplets);
        let mass = cache.laplacian().mass();
        let weights = self
            .free
            .iter()
            .flat_map(|&n| {
                let w = 1.0 / (mass[n] * nodes[n].g.trace());
                [w, w]
            })
            .collect();
        let system = SpdSystem::new(q, weights, &self.opts)?;
        Ok(self.tangential.get_or_init(|| system))
    }

    /// `P^⊤ X = g⁻¹ Tfᵀ P (Tf.X)`.
    pub fn apply_p_top(&self, cache: &GeometryCache, x: &TangentField) -> Result<TangentField> {
        self.check(cache)?;
        x.check_len(cache.len())?;
        let px = apply_p(cache, &self.params, &cache.push_forward(x))?;
        Ok(TangentField(
            cache
                .nodes()
                .iter()
                .zip(px.iter())
                .map(|(geo, v)| geo.g_inv * geo.pull_back(v))
                .collect(),
        ))
    }

    /// Solve `P^⊤ X = Y` with `X = 0` on a Dirichlet boundary.
    pub fn solve_p_top(&self, cache: &GeometryCache, y: &TangentField) -> Result<TangentField> {
        self.check(cache)?;
        y.check_len(cache.len())?;
        let mass = cache.laplacian().mass();
        let rhs: Vec<f64> = self
            .free
            .iter()
            .flat_map(|&n| {
                let v = cache.node(n).g * y[n] * mass[n];
                [v[0], v[1]]
            })
            .collect();
        self.solve_tangential(cache, &rhs)
    }

    fn solve_tangential(&self, cache: &GeometryCache, rhs: &[f64]) -> Result<TangentField> {
        let sol = self.tangential_system(cache)?.solve(rhs)?;
        let mut x = TangentField::zeros(cache.len());
        for (i, &n) in self.free.iter().enumerate() {
            x[n] = Vector2::new(sol[2 * i], sol[2 * i + 1]);
        }
        Ok(x)
    }

    /// Split `h = h_hor + Tf.h_ver` with `(P h_hor)^⊤ = 0` on the free nodes.
    pub fn horizontal_projection(&self, cache: &GeometryCache, h: &VectorField) -> Result<(VectorField, TangentField)> {
        self.check(cache)?;
        h.check_len(cache.len())?;
        let ph = apply_p(cache, &self.params, h)?;
        let mass = cache.laplacian().mass();
        let rhs: Vec<f64> = self
            .free
            .iter()
            .flat_map(|&n| {
                let v = cache.node(n).pull_back(&ph[n]) * mass[n];
                [v[0], v[1]]
            })
            .collect();
        let ver = self.solve_tangential(cache, &rhs)?;
        let hor = h.sub(&cache.push_forward(&ver));
        Ok((hor, ver))
    }
}

/// Tangential part `(P h)^⊤` in chart components, `g⁻¹ Tfᵀ P h`.
pub fn tangential_part(cache: &GeometryCache, params: &OperatorParams, h: &VectorField) -> Result<TangentField> {
    let ph = apply_p(cache, params, h)?;
    Ok(TangentField(
        cache
            .nodes()
            .iter()
            .zip(ph.iter())
            .map(|(geo, v)| geo.g_inv * geo.pull_back(v))
            .collect(),
    ))
}

/// Weighted norm `(Σ m_n g(X_n, X_n))^{1/2}` of a tangent field.
pub fn tangent_norm(cache: &GeometryCache, x: &TangentField) -> f64 {
    cache
        .laplacian()
        .mass()
        .iter()
        .zip(cache.nodes())
        .zip(x.iter())
        .map(|((m, geo), x)| m * x.dot(&(geo.g * x)))
        .sum::<f64>()
        .sqrt()
}
