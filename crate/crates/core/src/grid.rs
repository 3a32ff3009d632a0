//! Rectangular parameter grids and the finite-difference stencils defined on them.
//!
//! Nodes are stored in row-major order with `u` varying fastest: node `(i, j)` lives at
//! index `j * nu + i`. On a Dirichlet grid the nodes span the closed rectangle and the
//! outer ring is the boundary. On a periodic grid the rectangle is a flat torus: there
//! are no duplicated seam nodes and every stencil wraps around.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use nalgebra::{Vector2, Vector3};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Boundary {
    /// Boundary nodes are held fixed; velocities and momenta vanish there.
    DirichletZero,
    /// Flat-torus identification of opposite edges.
    Periodic,
}

impl Boundary {
    pub fn name(self) -> &'static str {
        match self {
            Boundary::DirichletZero => "dirichlet",
            Boundary::Periodic => "periodic",
        }
    }
}

/// Values that can be differenced on a grid: scalars and ambient vectors.
pub trait Nodal:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + Send + Sync
{
    fn zero() -> Self;
}

impl Nodal for f64 {
    fn zero() -> Self {
        0.0
    }
}

impl Nodal for Vector2<f64> {
    fn zero() -> Self {
        Vector2::zeros()
    }
}

impl Nodal for Vector3<f64> {
    fn zero() -> Self {
        Vector3::zeros()
    }
}

/// Amount a nodal quantity jumps by when a periodic stencil wraps across the seam.
///
/// Immersions of closed surfaces have zero jumps. A periodic sheet such as the plane
/// `(u, v, 0)` on a flat torus jumps by one period per wrap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeamShift<T> {
    pub u: T,
    pub v: T,
}

impl<T: Nodal> SeamShift<T> {
    pub fn zero() -> Self {
        SeamShift {
            u: T::zero(),
            v: T::zero(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamGrid {
    nu: usize,
    nv: usize,
    hu: f64,
    hv: f64,
    u0: f64,
    v0: f64,
    boundary: Boundary,
}

impl ParamGrid {
    /// Dirichlet grid of `nu × nv` nodes spanning `[u_range.0, u_range.1] × [v_range.0, v_range.1]`
    /// including the boundary.
    pub fn dirichlet(nu: usize, nv: usize, u_range: (f64, f64), v_range: (f64, f64)) -> Result<Self> {
        if nu < 3 || nv < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 nodes per axis, got {nu} x {nv}"
            )));
        }
        let grid = ParamGrid {
            nu,
            nv,
            hu: (u_range.1 - u_range.0) / (nu - 1) as f64,
            hv: (v_range.1 - v_range.0) / (nv - 1) as f64,
            u0: u_range.0,
            v0: v_range.0,
            boundary: Boundary::DirichletZero,
        };
        grid.check_spacing()?;
        Ok(grid)
    }

    /// Periodic grid of `nu × nv` nodes on the flat torus `[u0, u0 + lu) × [v0, v0 + lv)`.
    pub fn periodic(nu: usize, nv: usize, u_range: (f64, f64), v_range: (f64, f64)) -> Result<Self> {
        if nu < 3 || nv < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 nodes per axis, got {nu} x {nv}"
            )));
        }
        let grid = ParamGrid {
            nu,
            nv,
            hu: (u_range.1 - u_range.0) / nu as f64,
            hv: (v_range.1 - v_range.0) / nv as f64,
            u0: u_range.0,
            v0: v_range.0,
            boundary: Boundary::Periodic,
        };
        grid.check_spacing()?;
        Ok(grid)
    }

    /// The Dirichlet square `[0, π] × [0, π]` with `n × n` nodes.
    pub fn square(n: usize) -> Result<Self> {
        Self::dirichlet(n, n, (0.0, PI), (0.0, PI))
    }

    /// Build a grid of either boundary type over the given extents.
    pub fn new(
        boundary: Boundary,
        nu: usize,
        nv: usize,
        u_range: (f64, f64),
        v_range: (f64, f64),
    ) -> Result<Self> {
        match boundary {
            Boundary::DirichletZero => Self::dirichlet(nu, nv, u_range, v_range),
            Boundary::Periodic => Self::periodic(nu, nv, u_range, v_range),
        }
    }

    fn check_spacing(&self) -> Result<()> {
        if !(self.hu > 0.0 && self.hv > 0.0 && self.hu.is_finite() && self.hv.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "grid spacings must be positive, got hu = {}, hv = {}",
                self.hu, self.hv
            )));
        }
        Ok(())
    }

    pub fn nu(&self) -> usize {
        self.nu
    }
    pub fn nv(&self) -> usize {
        self.nv
    }
    pub fn hu(&self) -> f64 {
        self.hu
    }
    pub fn hv(&self) -> f64 {
        self.hv
    }
    pub fn boundary(&self) -> Boundary {
        self.boundary
    }
    pub fn is_periodic(&self) -> bool {
        self.boundary == Boundary::Periodic
    }

    pub fn len(&self) -> usize {
        self.nu * self.nv
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Length of the parameter domain along `u` and `v`.
    pub fn extent(&self) -> (f64, f64) {
        match self.boundary {
            Boundary::DirichletZero => ((self.nu - 1) as f64 * self.hu, (self.nv - 1) as f64 * self.hv),
            Boundary::Periodic => (self.nu as f64 * self.hu, self.nv as f64 * self.hv),
        }
    }

    pub fn origin(&self) -> (f64, f64) {
        (self.u0, self.v0)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nu + i
    }

    #[inline]
    pub fn coords(&self, n: usize) -> (usize, usize) {
        (n % self.nu, n / self.nu)
    }

    pub fn u(&self, i: usize) -> f64 {
        self.u0 + i as f64 * self.hu
    }

    pub fn v(&self, j: usize) -> f64 {
        self.v0 + j as f64 * self.hv
    }

    /// Parameter coordinates of node `n`.
    pub fn position(&self, n: usize) -> (f64, f64) {
        let (i, j) = self.coords(n);
        (self.u(i), self.v(j))
    }

    #[inline]
    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        self.boundary == Boundary::DirichletZero
            && (i == 0 || j == 0 || i + 1 == self.nu || j + 1 == self.nv)
    }

    pub fn is_boundary_node(&self, n: usize) -> bool {
        let (i, j) = self.coords(n);
        self.is_boundary(i, j)
    }

    /// Nodes carrying unknowns: interior nodes on a Dirichlet grid, all nodes otherwise.
    pub fn free_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&n| !self.is_boundary_node(n)).collect()
    }

    /// Free nodes in a bandwidth-reducing order.
    ///
    /// Dirichlet grids keep the natural order. On periodic grids each axis is folded
    /// (`0, n-1, 1, n-2, …`) so that wrap-around neighbours stay close and the
    /// bandwidth is about `2·nu` instead of `nu·(nv-1)`.
    pub fn banded_order(&self) -> Vec<usize> {
        let mut nodes = self.free_nodes();
        if self.is_periodic() {
            let fold = |k: usize, n: usize| if 2 * k < n { 2 * k } else { 2 * (n - 1 - k) + 1 };
            nodes.sort_by_key(|&n| {
                let (i, j) = self.coords(n);
                (fold(j, self.nv), fold(i, self.nu))
            });
        }
        nodes
    }

    /// Trapezoidal (Dirichlet) or rectangle-rule (periodic) weight of node `n`,
    /// without the `hu * hv` cell area.
    pub fn quadrature_weight(&self, n: usize) -> f64 {
        if self.is_periodic() {
            return 1.0;
        }
        let (i, j) = self.coords(n);
        let wu = if i == 0 || i + 1 == self.nu { 0.5 } else { 1.0 };
        let wv = if j == 0 || j + 1 == self.nv { 0.5 } else { 1.0 };
        wu * wv
    }

    pub fn cell_area(&self) -> f64 {
        self.hu * self.hv
    }

    /// Evaluate a function of the parameters at every node.
    pub fn sample<T>(&self, f: impl Fn(f64, f64) -> T) -> Vec<T> {
        (0..self.len())
            .map(|n| {
                let (u, v) = self.position(n);
                f(u, v)
            })
            .collect()
    }

    /// Value at `(i + di, j + dj)`, wrapping (with seam shift) on periodic grids.
    #[inline]
    pub fn neighbor<T: Nodal>(&self, vals: &[T], shift: &SeamShift<T>, i: usize, j: usize, di: isize, dj: isize) -> T {
        let (nu, nv) = (self.nu as isize, self.nv as isize);
        let ii = i as isize + di;
        let jj = j as isize + dj;
        let ku = ii.div_euclid(nu);
        let kv = jj.div_euclid(nv);
        let base = vals[self.index(ii.rem_euclid(nu) as usize, jj.rem_euclid(nv) as usize)];
        if ku == 0 && kv == 0 {
            base
        } else {
            base + shift.u * ku as f64 + shift.v * kv as f64
        }
    }

    /// Second-order first derivative along `u` at node `(i, j)`.
    pub fn d_u<T: Nodal>(&self, vals: &[T], shift: &SeamShift<T>, i: usize, j: usize) -> T {
        let at = |d: isize| self.neighbor(vals, shift, i, j, d, 0);
        first_derivative(self.is_periodic(), i, self.nu, self.hu, at)
    }

    pub fn d_v<T: Nodal>(&self, vals: &[T], shift: &SeamShift<T>, i: usize, j: usize) -> T {
        let at = |d: isize| self.neighbor(vals, shift, i, j, 0, d);
        first_derivative(self.is_periodic(), j, self.nv, self.hv, at)
    }

    pub fn d_uu<T: Nodal>(&self, vals: &[T], shift: &SeamShift<T>, i: usize, j: usize) -> T {
        let at = |d: isize| self.neighbor(vals, shift, i, j, d, 0);
        second_derivative(self.is_periodic(), i, self.nu, self.hu, at)
    }

    pub fn d_vv<T: Nodal>(&self, vals: &[T], shift: &SeamShift<T>, i: usize, j: usize) -> T {
        let at = |d: isize| self.neighbor(vals, shift, i, j, 0, d);
        second_derivative(self.is_periodic(), j, self.nv, self.hv, at)
    }

    /// Nodal gradient `(∂_u, ∂_v)` of a whole field.
    pub fn gradient<T: Nodal>(&self, vals: &[T], shift: &SeamShift<T>) -> (Vec<T>, Vec<T>) {
        let mut du = Vec::with_capacity(self.len());
        let mut dv = Vec::with_capacity(self.len());
        for j in 0..self.nv {
            for i in 0..self.nu {
                du.push(self.d_u(vals, shift, i, j));
                dv.push(self.d_v(vals, shift, i, j));
            }
        }
        (du, dv)
    }

    /// Bilinear interpolation at parameter point `(u, v)`.
    ///
    /// Periodic grids wrap (applying the seam shift). On a Dirichlet grid points outside
    /// the rectangle are clamped to it and the returned flag is set.
    pub fn interpolate<T: Nodal>(&self, vals: &[T], shift: &SeamShift<T>, u: f64, v: f64) -> (T, bool) {
        let mut su = (u - self.u0) / self.hu;
        let mut sv = (v - self.v0) / self.hv;
        let mut clamped = false;
        if !self.is_periodic() {
            let (mu, mv) = ((self.nu - 1) as f64, (self.nv - 1) as f64);
            if !(0.0..=mu).contains(&su) || !(0.0..=mv).contains(&sv) {
                clamped = true;
                su = su.clamp(0.0, mu);
                sv = sv.clamp(0.0, mv);
            }
        }
        let mut i0 = su.floor() as isize;
        let mut j0 = sv.floor() as isize;
        if !self.is_periodic() {
            i0 = i0.min(self.nu as isize - 2);
            j0 = j0.min(self.nv as isize - 2);
        }
        let (a, b) = (su - i0 as f64, sv - j0 as f64);
        let at = |di: isize, dj: isize| self.neighbor(vals, shift, 0, 0, i0 + di, j0 + dj);
        let val = at(0, 0) * ((1.0 - a) * (1.0 - b)) + at(1, 0) * (a * (1.0 - b)) + at(0, 1) * ((1.0 - a) * b) + at(1, 1) * (a * b);
        (val, clamped)
    }

    /// Central-difference divergence `∂_u x + ∂_v y` of a (density-weighted) flux field.
    pub fn divergence(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let zero = SeamShift::zero();
        let mut out = Vec::with_capacity(self.len());
        for j in 0..self.nv {
            for i in 0..self.nu {
                out.push(self.d_u(x, &zero, i, j) + self.d_v(y, &zero, i, j));
            }
        }
        out
    }
}

fn first_derivative<T: Nodal>(periodic: bool, k: usize, n: usize, h: f64, at: impl Fn(isize) -> T) -> T {
    if periodic || (k > 0 && k + 1 < n) {
        (at(1) - at(-1)) * (0.5 / h)
    } else if k == 0 {
        (at(0) * -3.0 + at(1) * 4.0 - at(2)) * (0.5 / h)
    } else {
        (at(0) * 3.0 - at(-1) * 4.0 + at(-2)) * (0.5 / h)
    }
}

fn second_derivative<T: Nodal>(periodic: bool, k: usize, n: usize, h: f64, at: impl Fn(isize) -> T) -> T {
    let inv = 1.0 / (h * h);
    if periodic || (k > 0 && k + 1 < n) {
        (at(1) - at(0) * 2.0 + at(-1)) * inv
    } else if n < 4 {
        // three nodes only: first-order fallback
        let s = if k == 0 { 1 } else { -1 };
        (at(0) - at(s) * 2.0 + at(2 * s)) * inv
    } else {
        let s = if k == 0 { 1 } else { -1 };
        (at(0) * 2.0 - at(s) * 5.0 + at(2 * s) * 4.0 - at(3 * s)) * inv
    }
}
