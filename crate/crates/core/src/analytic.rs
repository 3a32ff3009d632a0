//! Closed-form and quadrature-based special cases.
//!
//! * concentric spheres in `ℝⁿ`: the radius ODE, its conserved energy, path length and
//!   the completeness classification;
//! * the zig-zag reparametrization that drives `H⁰` path lengths to zero;
//! * the shrink–translate–grow path showing that `G^P` lengths do not control the
//!   Fréchet distance.

use std::f64::consts::PI;

use nalgebra::Vector3;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::geometry::{build_geometry, h0_inner, Immersion};
use crate::operator::{apply_p, gp_inner, OperatorParams};
use crate::quadrature::{gauss_legendre, integrate, QuadratureOptions};

fn check_dimension(n: u32) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("ambient dimension must be >= 2, got {n}")));
    }
    Ok(())
}

/// `A (n-1)^p`, the eigenvalue weight of `Δ^p` on the unit sphere normal.
fn curvature_weight(params: &OperatorParams, n: u32) -> f64 {
    params.a * ((n - 1) as f64).powi(params.p as i32)
}

/// Surface measure of the unit sphere `S^{n-1}`: `n π^{n/2} / Γ(n/2 + 1)`.
pub fn unit_sphere_area(n: u32) -> f64 {
    n as f64 * PI.powf(n as f64 / 2.0) / gamma(n as f64 / 2.0 + 1.0)
}

/// `Vol(r) = r^{n-1} n π^{n/2} / Γ(n/2 + 1)`.
pub fn sphere_volume(r: f64, n: u32) -> f64 {
    r.powi(n as i32 - 1) * unit_sphere_area(n)
}

/// `E = r_t² (1 + A(n-1)^p / r^{2p}) Vol(r)`.
pub fn sphere_energy(r: f64, rt: f64, params: &OperatorParams, n: u32) -> f64 {
    rt * rt * (1.0 + curvature_weight(params, n) / r.powi(2 * params.p as i32)) * sphere_volume(r, n)
}

/// `r_tt = -r_t² ((n-1)/(2r) - p A (n-1)^p / (r (r^{2p} + A (n-1)^p)))`.
pub fn sphere_acceleration(r: f64, rt: f64, params: &OperatorParams, n: u32) -> f64 {
    let c = curvature_weight(params, n);
    let p = params.p as i32;
    -rt * rt * ((n - 1) as f64 / (2.0 * r) - p as f64 * c / (r * (r.powi(2 * p) + c)))
}

/// Sampled solution of the radius ODE.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusTrajectory {
    pub t: Vec<f64>,
    pub r: Vec<f64>,
    pub rt: Vec<f64>,
}

/// RK4 integration of the concentric-sphere geodesic equation.
///
/// Fails with [`Error::SphereCollapse`] at the first step where the radius would become
/// non-positive.
pub fn sphere_geodesic_ode(
    r0: f64,
    rdot0: f64,
    params: &OperatorParams,
    n: u32,
    dt: f64,
    t_final: f64,
) -> Result<RadiusTrajectory> {
    params.validate()?;
    check_dimension(n)?;
    if !(r0 > 0.0) {
        return Err(Error::InvalidParameter(format!("initial radius must be > 0, got {r0}")));
    }
    if !(dt > 0.0) || !(t_final >= 0.0) {
        return Err(Error::InvalidParameter("need dt > 0 and t_final >= 0".into()));
    }
    let rhs = |r: f64, v: f64| (v, sphere_acceleration(r, v, params, n));
    let steps = (t_final / dt - 1e-9).ceil().max(0.0) as usize;
    let mut out = RadiusTrajectory {
        t: vec![0.0],
        r: vec![r0],
        rt: vec![rdot0],
    };
    let (mut r, mut v, mut t) = (r0, rdot0, 0.0);
    for k in 0..steps {
        let h = if k + 1 == steps { t_final - t } else { dt };
        let collapse = |x: f64| !(x > 0.0) || !x.is_finite();
        let (k1r, k1v) = rhs(r, v);
        let r2 = r + 0.5 * h * k1r;
        if collapse(r2) {
            return Err(Error::SphereCollapse { t });
        }
        let (k2r, k2v) = rhs(r2, v + 0.5 * h * k1v);
        let r3 = r + 0.5 * h * k2r;
        if collapse(r3) {
            return Err(Error::SphereCollapse { t });
        }
        let (k3r, k3v) = rhs(r3, v + 0.5 * h * k2v);
        let r4 = r + h * k3r;
        if collapse(r4) {
            return Err(Error::SphereCollapse { t });
        }
        let (k4r, k4v) = rhs(r4, v + h * k3v);
        r += h / 6.0 * (k1r + 2.0 * k2r + 2.0 * k3r + k4r);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        t = if k + 1 == steps { t_final } else { (k + 1) as f64 * dt };
        if collapse(r) {
            return Err(Error::SphereCollapse { t });
        }
        out.t.push(t);
        out.r.push(r);
        out.rt.push(v);
    }
    Ok(out)
}

/// `G^P` length of the radial path between concentric spheres of radii `r0` and `r1`:
/// `√(nπ^{n/2}/Γ(n/2+1)) |∫_{r0}^{r1} √((1 + A(n-1)^p / r^{2p}) r^{n-1}) dr|`.
///
/// The integral is taken in `s = ln r`, which keeps radii as small as `e^{-1000}`
/// representable.
pub fn sphere_path_length(r0: f64, r1: f64, params: &OperatorParams, n: u32) -> Result<f64> {
    if !(r0 > 0.0) || !(r1 > 0.0) {
        return Err(Error::InvalidParameter("radii must be > 0".into()));
    }
    sphere_path_length_log(r0.ln(), r1.ln(), params, n)
}

/// [`sphere_path_length`] with the radii given by their logarithms.
pub fn sphere_path_length_log(s0: f64, s1: f64, params: &OperatorParams, n: u32) -> Result<f64> {
    params.validate()?;
    check_dimension(n)?;
    let c = curvature_weight(params, n);
    let (n, p) = (n as f64, params.p as f64);
    // e^s √((1 + c e^{-2ps}) e^{(n-1)s}) = √(e^{(n+1)s} + c e^{(n+1-2p)s}), summed in log space
    let integrand = |s: f64| {
        let x1 = (n + 1.0) * s;
        if c == 0.0 {
            return (0.5 * x1).exp();
        }
        let x2 = c.ln() + (n + 1.0 - 2.0 * p) * s;
        let m = x1.max(x2);
        (0.5 * (m + ((x1 - m).exp() + (x2 - m).exp()).ln())).exp()
    };
    let (lo, hi) = if s0 <= s1 { (s0, s1) } else { (s1, s0) };
    let value = integrate(integrand, lo, hi, &QuadratureOptions::default())?;
    Ok(unit_sphere_area(n as u32).sqrt() * value)
}

/// Outcome of the completeness divergence test.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletenessReport {
    pub n: u32,
    pub params: OperatorParams,
    /// `(ln ε, length from r = 1 down to ε)`.
    pub lengths: Vec<(f64, f64)>,
    /// Length of the same shrink for `p = 1`, which stays finite in every dimension `n ≥ 2`.
    pub benchmark: f64,
    /// Numerical verdict: lengths exceed `1000 × benchmark` and keep growing.
    pub complete: bool,
    /// The analytic criterion `p ≥ (n+1)/2`.
    pub predicted_complete: bool,
}

/// Exponents `ln ε` probed by [`classify_completeness`].
pub const COMPLETENESS_LOG_EPS: [f64; 4] = [-10.0, -100.0, -500.0, -1000.0];

/// Decide whether shrinking a sphere to a point costs infinite `G^P` length.
pub fn classify_completeness(n: u32, params: &OperatorParams) -> Result<CompletenessReport> {
    let bench_params = OperatorParams { a: params.a, p: 1 };
    let deepest = *COMPLETENESS_LOG_EPS.last().expect("nonempty");
    let benchmark = sphere_path_length_log(deepest, 0.0, &bench_params, n)?;
    let lengths = COMPLETENESS_LOG_EPS
        .iter()
        .map(|&s| Ok((s, sphere_path_length_log(s, 0.0, params, n)?)))
        .collect::<Result<Vec<_>>>()?;
    let growing = lengths.windows(2).all(|w| w[1].1 > w[0].1 * (1.0 + 1e-9));
    let last = lengths.last().expect("nonempty").1;
    let complete = growing && last > 1e3 * benchmark;
    Ok(CompletenessReport {
        n,
        params: *params,
        lengths,
        benchmark,
        complete,
        predicted_complete: 2 * params.p >= n + 1,
    })
}

/// The zig-zag reparametrization `φ(t, α)` with `n` teeth.
pub fn zigzag_phi(n: u32, t: f64, alpha: f64) -> f64 {
    let (k, rising) = zigzag_cell(n, alpha);
    let s = 2.0 * n as f64 * alpha - 2.0 * k;
    let tooth = if rising { s } else { 2.0 - s };
    if t <= 0.5 {
        2.0 * t * tooth
    } else {
        2.0 * t - 1.0 + 2.0 * (1.0 - t) * tooth
    }
}

/// `∂φ/∂α`.
pub fn zigzag_phi_alpha(n: u32, t: f64, alpha: f64) -> f64 {
    let (_, rising) = zigzag_cell(n, alpha);
    let slope = if t <= 0.5 { 4.0 * n as f64 * t } else { 4.0 * n as f64 * (1.0 - t) };
    if rising {
        slope
    } else {
        -slope
    }
}

/// `∂φ/∂t`.
pub fn zigzag_phi_t(n: u32, t: f64, alpha: f64) -> f64 {
    let (k, rising) = zigzag_cell(n, alpha);
    let s = 4.0 * n as f64 * alpha - 4.0 * k;
    match (t <= 0.5, rising) {
        (true, true) => s,
        (true, false) => 4.0 - s,
        (false, true) => 2.0 - s,
        (false, false) => -(2.0 - s),
    }
}

/// Tooth index `k` and whether `α` lies on the rising half `[2k/2n, (2k+1)/2n]`.
fn zigzag_cell(n: u32, alpha: f64) -> (f64, bool) {
    let x = (2.0 * n as f64 * alpha).clamp(0.0, 2.0 * n as f64);
    let half = x.floor().min(2.0 * n as f64 - 1.0);
    let k = (half / 2.0).floor();
    (k, half - 2.0 * k < 1.0)
}

/// An `H⁰`-horizontal base path described on the level sets of the Morse surrogate `α`.
///
/// All quantities entering the zig-zag length depend on a point only through its level
/// `α`, so the base path is given by functions of `α` (and the base time).
pub struct ZigzagBase {
    /// Volume of `{α ≤ level ≤ α + dα}` per unit `α`.
    pub slice_volume: Box<dyn Fn(f64) -> f64 + Sync>,
    /// `‖dα‖_g` on the level set.
    pub dalpha_norm: Box<dyn Fn(f64) -> f64 + Sync>,
    /// `‖f_t‖` at base time `τ` on the level set.
    pub speed: Box<dyn Fn(f64, f64) -> f64 + Sync>,
}

impl ZigzagBase {
    /// Unit-speed normal translation of the flat square `[0, π]²` with `α = u/π`.
    pub fn default_translation() -> Self {
        ZigzagBase {
            slice_volume: Box::new(|_| PI * PI),
            dalpha_norm: Box::new(|_| 1.0 / PI),
            speed: Box::new(|_, _| 1.0),
        }
    }
}

/// `L^hor` of the zig-zag path `f(φ(t, α(x)), x)` with `n` teeth.
///
/// The inner integral over `α` uses Gauss–Legendre rules on each half-tooth (where `φ`
/// is affine); the outer integral over `t` is adaptive on `[0, ½]` and `[½, 1]`.
pub fn zigzag_horizontal_length(base: &ZigzagBase, n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("zig-zag count must be >= 1".into()));
    }
    let (gx, gw) = gauss_legendre(6);
    let halves = 2 * n as usize;
    let width = 1.0 / halves as f64;
    let inner = |t: f64| -> f64 {
        let mut total = 0.0;
        for h in 0..halves {
            let lo = h as f64 * width;
            for (x, w) in gx.iter().zip(&gw) {
                let alpha = lo + 0.5 * width * (1.0 + x);
                let tau = zigzag_phi(n, t, alpha);
                let s2 = (base.speed)(tau, alpha).powi(2);
                let pt = zigzag_phi_t(n, t, alpha);
                let pa = zigzag_phi_alpha(n, t, alpha);
                let da = (base.dalpha_norm)(alpha);
                let density = pt * pt * s2 / (1.0 + pa * pa * da * da * s2).sqrt();
                total += 0.5 * width * w * density * (base.slice_volume)(alpha);
            }
        }
        total.max(0.0).sqrt()
    };
    let opts = QuadratureOptions::default();
    Ok(integrate(&inner, 0.0, 0.5, &opts)? + integrate(&inner, 0.5, 1.0, &opts)?)
}

/// Ingredients of the scaling path `r ↦ r·f0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingIntegrand {
    /// `∫ |f0|² vol(g0)`.
    pub c0: f64,
    /// `∫ ⟨Δ^p f0, f0⟩ vol(g0)`.
    pub cp: f64,
    pub a: f64,
    pub p: u32,
    /// Dimension of the parameter manifold.
    pub m: u32,
}

impl ScalingIntegrand {
    pub fn new(f0: &Immersion, params: &OperatorParams) -> Result<Self> {
        params.validate()?;
        let cache = build_geometry(f0)?;
        let pos = VectorField(f0.points().to_vec());
        let c0 = h0_inner(&cache, &pos, &pos)?;
        let unit = OperatorParams { a: 1.0, p: params.p };
        let cp = h0_inner(&cache, &apply_p(&cache, &unit, &pos)?.sub(&pos), &pos)?;
        Ok(ScalingIntegrand {
            c0,
            cp,
            a: params.a,
            p: params.p,
            m: 2,
        })
    }

    /// `√(r^m c0 + A r^{m-2p} cp)`.
    pub fn eval(&self, r: f64) -> f64 {
        let m = self.m as i32;
        (r.powi(m) * self.c0 + self.a * r.powi(m - 2 * self.p as i32) * self.cp).sqrt()
    }
}

/// `G^P` length of the scaling path `r·f0` for `r ∈ [r_floor, 1]`.
pub fn scaling_path_length(f0: &Immersion, params: &OperatorParams, r_floor: f64) -> Result<f64> {
    if !(r_floor > 0.0 && r_floor < 1.0) {
        return Err(Error::InvalidParameter(format!("r_floor must lie in (0, 1), got {r_floor}")));
    }
    let integrand = ScalingIntegrand::new(f0, params)?;
    integrate(|r| integrand.eval(r), r_floor, 1.0, &QuadratureOptions::default())
}

/// Cost breakdown of the shrink–translate–grow path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrechetReport {
    pub translation_distance: f64,
    /// Length of shrinking `f0` to `r_floor · f0` (growing back costs the same).
    pub scaling_length: f64,
    /// Length of translating `r_floor · f0` by the translation distance.
    pub translation_length: f64,
    /// `2 · scaling_length + translation_length`.
    pub total: f64,
    /// Fréchet distance between `f0` and its translate.
    pub frechet_displacement: f64,
}

/// Cost of moving `f0` by `ell` along `e_x` through the scale `r_floor`.
pub fn shrink_translate_grow(f0: &Immersion, params: &OperatorParams, r_floor: f64, ell: f64) -> Result<FrechetReport> {
    if !(ell >= 0.0) {
        return Err(Error::InvalidParameter(format!("translation distance must be >= 0, got {ell}")));
    }
    let scaling_length = scaling_path_length(f0, params, r_floor)?;
    let small = f0.scaled(r_floor);
    let cache = build_geometry(&small)?;
    // a rigid translation at unit time speed: f_t = ell·e_x everywhere
    let velocity = VectorField(vec![Vector3::x() * ell; cache.len()]);
    let translation_length = gp_inner(&cache, params, &velocity, &velocity)?.max(0.0).sqrt();
    Ok(FrechetReport {
        translation_distance: ell,
        scaling_length,
        translation_length,
        total: 2.0 * scaling_length + translation_length,
        frechet_displacement: ell,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ParamGrid;

    fn params(a: f64, p: u32) -> OperatorParams {
        OperatorParams::new(a, p).unwrap()
    }

    #[test]
    fn unit_sphere_areas() {
        assert!((unit_sphere_area(2) - 2.0 * PI).abs() < 1e-12);
        assert!((unit_sphere_area(3) - 4.0 * PI).abs() < 1e-12);
        assert!((unit_sphere_area(4) - 2.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn equilibrium_radius_stays_put() {
        let traj = sphere_geodesic_ode(1.3, 0.0, &params(1.0, 1), 3, 0.01, 1.0).unwrap();
        assert!(traj.r.iter().all(|r| *r == 1.3));
        assert_eq!(traj.t.len(), 101);
    }

    #[test]
    fn inward_shot_collapses_when_incomplete() {
        let err = sphere_geodesic_ode(1.0, -1.0, &params(1.0, 1), 3, 1e-3, 10.0).unwrap_err();
        match err {
            Error::SphereCollapse { t } => assert!(t > 0.1 && t < 10.0, "{t}"),
            other => panic!("{other}"),
        }
        // p = 2 only approaches zero asymptotically
        let traj = sphere_geodesic_ode(1.0, -1.0, &params(1.0, 2), 3, 1e-3, 10.0).unwrap();
        assert!(traj.r.last().unwrap() > &0.0);
    }

    #[test]
    fn ode_energy_is_conserved() {
        for p in 1..=3 {
            let pr = params(0.7, p);
            let traj = sphere_geodesic_ode(1.2, 0.4, &pr, 3, 1e-3, 2.0).unwrap();
            let e0 = sphere_energy(traj.r[0], traj.rt[0], &pr, 3);
            for (r, v) in traj.r.iter().zip(&traj.rt) {
                assert!((sphere_energy(*r, *v, &pr, 3) / e0 - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn path_length_basics() {
        let pr = params(1.0, 1);
        assert_eq!(sphere_path_length(0.7, 0.7, &pr, 3).unwrap(), 0.0);
        let a = sphere_path_length(0.5, 1.0, &pr, 3).unwrap();
        let b = sphere_path_length(1.0, 2.0, &pr, 3).unwrap();
        let c = sphere_path_length(0.5, 2.0, &pr, 3).unwrap();
        assert!((a + b - c).abs() < 1e-10 * c);
        assert_eq!(sphere_path_length(2.0, 0.5, &pr, 3).unwrap(), c);
        // A = 0: √(4π) ∫ r dr
        let h0 = sphere_path_length(0.0f64.exp(), 2.0, &params(0.0, 1), 3).unwrap();
        assert!((h0 - (4.0 * PI).sqrt() * 1.5).abs() < 1e-12);
    }

    #[test]
    fn completeness_matches_theory() {
        for (n, p, expect) in [(3, 1, false), (3, 2, true), (2, 1, false), (4, 3, true)] {
            let report = classify_completeness(n, &params(1.0, p)).unwrap();
            assert_eq!(report.predicted_complete, expect);
            assert_eq!(report.complete, expect, "n={n} p={p}: {report:?}");
        }
    }

    #[test]
    fn zigzag_endpoints_and_slopes() {
        for n in [1, 4, 16] {
            for i in 0..=200 {
                let alpha = i as f64 / 200.0;
                assert!(zigzag_phi(n, 0.0, alpha).abs() < 1e-14);
                assert!((zigzag_phi(n, 1.0, alpha) - 1.0).abs() < 1e-14);
                for t in [0.1, 0.3, 0.5] {
                    assert!((zigzag_phi_alpha(n, t, alpha).abs() - 4.0 * n as f64 * t).abs() < 1e-12);
                }
            }
        }
        // derivatives agree with finite differences away from kinks
        let (n, t, alpha) = (4, 0.3, 0.07);
        let h = 1e-7;
        let dt = (zigzag_phi(n, t + h, alpha) - zigzag_phi(n, t - h, alpha)) / (2.0 * h);
        let da = (zigzag_phi(n, t, alpha + h) - zigzag_phi(n, t, alpha - h)) / (2.0 * h);
        assert!((dt - zigzag_phi_t(n, t, alpha)).abs() < 1e-6);
        assert!((da - zigzag_phi_alpha(n, t, alpha)).abs() < 1e-5);
        let t = 0.8;
        let dt = (zigzag_phi(n, t + h, 0.2) - zigzag_phi(n, t - h, 0.2)) / (2.0 * h);
        assert!((dt - zigzag_phi_t(n, t, 0.2)).abs() < 1e-6);
    }

    #[test]
    fn zigzag_lengths_match_closed_form() {
        // independent values of 2π√(4/3) ∫_0^½ (1 + (4nt/π)²)^(-1/4) dt
        let oracle = [
            (4, 2.895881404425855),
            (8, 2.371691410436809),
            (16, 1.848377481773010),
            (32, 1.394408359304574),
            (64, 1.030011223553410),
        ];
        let base = ZigzagBase::default_translation();
        for (n, expect) in oracle {
            let l = zigzag_horizontal_length(&base, n).unwrap();
            assert!((l - expect).abs() < 1e-9, "n={n}: {l} vs {expect}");
        }
    }

    #[test]
    fn scaling_path_on_torus() {
        let grid = ParamGrid::periodic(48, 32, (0.0, 2.0 * PI), (0.0, 2.0 * PI)).unwrap();
        let torus = Immersion::torus(grid, 3.0, 1.0).unwrap();
        let integrand = ScalingIntegrand::new(&torus, &params(1.0, 1)).unwrap();
        let vol = build_geometry(&torus).unwrap().volume();
        // ∫⟨Δf, f⟩ = ∫|∇f|² = 2 Vol
        assert!((integrand.cp / (2.0 * vol) - 1.0).abs() < 1e-2, "{} {}", integrand.cp, vol);
        let l3 = scaling_path_length(&torus, &params(1.0, 1), 1e-3).unwrap();
        let l4 = scaling_path_length(&torus, &params(1.0, 1), 1e-4).unwrap();
        // the integrand tends to √(A cp) at r = 0, so the tail adds about 9e-4 · √(A cp)
        let tail = 9e-4 * integrand.cp.sqrt();
        assert!(((l4 - l3) / tail - 1.0).abs() < 1e-3, "{l3} {l4} {tail}");
        let d3 = scaling_path_length(&torus, &params(1.0, 2), 1e-3).unwrap();
        let d6 = scaling_path_length(&torus, &params(1.0, 2), 1e-6).unwrap();
        assert!(d6 > d3 * 1.5, "{d3} {d6}");
    }
}
