//! Linearised problems around a radial solution `u` of the critical equation:
//! the profiles `v` and `w`, sector spectra of `-Delta - (lambda + f'(u))`,
//! the critical-level sets used by the essential non-degeneracy test, and the
//! test function `w_eta`.

use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::nonlinear_radial::{exponent, solve_bvp, source, source_deriv, BranchPoint, DEFAULT_AMPLITUDES};
use crate::radial_core::ode::{integrate, Tolerances};
use crate::radial_core::operator::{relative_residual, NEAR_SINGULAR};
use crate::radial_core::{
    make_grid, min_singular_value, sector_eigenvalue, solve_dirichlet, Grading, OperatorSpec, Potential, RadialFn,
    RadialGrid, Scheme,
};
use crate::roots::brent;

/// Default highest sector examined by [`sector_spectrum`].
pub const DEFAULT_LMAX: usize = 24;
/// Relative tolerance for level and criticality tests.
pub const LEVEL_TOL: f64 = 1e-8;

/// The solutions `v` and `w` of the two auxiliary problems at one `lambda`.
#[derive(Debug, Clone)]
pub struct AuxProfiles {
    pub lambda: f64,
    pub v: RadialFn,
    pub w: RadialFn,
    /// Relative residuals under the fourth-order operator.
    pub v_residual: f64,
    pub w_residual: f64,
}

/// Potential `f'(u)` sampled on the grid of `u`.
pub fn linearised_potential(u: &RadialFn) -> RadialFn {
    let dim = u.grid().dim();
    let p = exponent(dim);
    u.compose(
        |x| source_deriv(dim, x),
        move |x| {
            if dim == 6 {
                2.0 * x.signum()
            } else {
                p * (p - 1.0) * x.abs().powf(p - 2.0) * x.signum()
            }
        },
    )
}

/// `-Delta_l - (lambda + f'(u))` on the grid of `u`.
pub fn linearised_operator(u: &BranchPoint, sector: usize) -> Result<OperatorSpec> {
    OperatorSpec::new(u.profile.grid().clone(), sector, u.lambda, Potential::Profile(linearised_potential(&u.profile)))
}

fn check_invertible(op: &OperatorSpec) -> Result<()> {
    let threshold = NEAR_SINGULAR * op.scale();
    let sigma = min_singular_value(op);
    if sigma < threshold {
        Err(Error::NearSingular { sigma, threshold })
    } else {
        Ok(())
    }
}

fn is_trivial(u: &BranchPoint) -> bool {
    u.amplitude == 0.0 && u.profile.sup_norm() == 0.0
}

/// Integrates `D`-component regular solutions from the origin, sampling nodes
/// below the start radius from `series`.
fn radial_pass<const D: usize>(
    grid: &Arc<RadialGrid>,
    r0: f64,
    y0: [f64; D],
    series: impl Fn(f64) -> [f64; D],
    rhs: impl FnMut(f64, &[f64; D]) -> [f64; D],
    tol: Tolerances,
) -> Result<(Vec<[f64; D]>, [f64; D])> {
    let nodes = grid.nodes();
    let split = nodes.partition_point(|&r| r <= r0);
    let tr = integrate(rhs, r0, y0, 1.0, &nodes[split..], tol, |_, _| true)?;
    let mut out: Vec<[f64; D]> = nodes[..split].iter().map(|&r| series(r)).collect();
    out.extend(tr.samples);
    Ok((out, tr.end))
}

fn start_radius(dim: usize, lambda: f64, a: f64) -> f64 {
    1e-4 / (lambda.abs() + a.abs().powf(exponent(dim) - 1.0)).sqrt().max(1.0)
}

/// Coefficients `(c2, c4)` of `u = a + c2 r^2 + c4 r^4`.
fn base_series(dim: usize, lambda: f64, a: f64) -> (f64, f64) {
    let n = dim as f64;
    let c2 = -(lambda * a + source(dim, a)) / (2.0 * n);
    (c2, -(lambda + source_deriv(dim, a)) * c2 / (4.0 * (n + 2.0)))
}

/// `v(0)` of the solution of `-Delta v = (lambda + f'(u)) v + u`, `v(1) = 0`,
/// by linear shooting (particular plus multiple of homogeneous solution).
fn v_origin(u: &BranchPoint, tol: Tolerances) -> Result<f64> {
    let dim = u.dim;
    let (lambda, a) = (u.lambda, u.amplitude);
    let n = dim as f64;
    let r0 = start_radius(dim, lambda, a);
    let (c2, c4) = base_series(dim, lambda, a);
    let p0 = lambda + source_deriv(dim, a);
    let (cp, ch) = (-a / (2.0 * n), -p0 / (2.0 * n));
    let at = |r: f64| {
        let r2 = r * r;
        [
            a + c2 * r2 + c4 * r2 * r2,
            2.0 * c2 * r + 4.0 * c4 * r2 * r,
            cp * r2,
            2.0 * cp * r,
            1.0 + ch * r2,
            2.0 * ch * r,
        ]
    };
    let tr = integrate(
        |r, y: &[f64; 6]| {
            let k = -(n - 1.0) / r;
            let q = lambda + source_deriv(dim, y[0]);
            [
                y[1],
                k * y[1] - lambda * y[0] - source(dim, y[0]),
                y[3],
                k * y[3] - q * y[2] - y[0],
                y[5],
                k * y[5] - q * y[4],
            ]
        },
        r0,
        at(r0),
        1.0,
        &[],
        tol,
        |_, _| true,
    )?;
    Ok(-tr.end[2] / tr.end[4])
}

/// Profiles `u`, `v` and optionally `w` sampled on `grid`, given `v(0)`.
/// Returns the samples and the multiplier of the homogeneous `w` solution.
fn profiles_from_origin(
    grid: &Arc<RadialGrid>,
    u: &BranchPoint,
    v0: f64,
    tol: Tolerances,
) -> Result<(Vec<[f64; 8]>, f64)> {
    let dim = u.dim;
    let (lambda, a) = (u.lambda, u.amplitude);
    let n = dim as f64;
    let r0 = start_radius(dim, lambda, a);
    let (c2, c4) = base_series(dim, lambda, a);
    let p0 = lambda + source_deriv(dim, a);
    let cv = -(p0 * v0 + a) / (2.0 * n);
    let sgn = |x: f64| {
        if x > 0.0 {
            1.0
        } else if x < 0.0 {
            -1.0
        } else {
            0.0
        }
    };
    let cw = -(v0 + sgn(a) * v0 * v0) / (2.0 * n);
    let ch = -p0 / (2.0 * n);
    let series = |r: f64| {
        let r2 = r * r;
        [
            a + c2 * r2 + c4 * r2 * r2,
            2.0 * c2 * r + 4.0 * c4 * r2 * r,
            v0 + cv * r2,
            2.0 * cv * r,
            cw * r2,
            2.0 * cw * r,
            1.0 + ch * r2,
            2.0 * ch * r,
        ]
    };
    let (samples, end) = radial_pass(
        grid,
        r0,
        series(r0),
        series,
        |r, y: &[f64; 8]| {
            let k = -(n - 1.0) / r;
            let q = lambda + source_deriv(dim, y[0]);
            [
                y[1],
                k * y[1] - lambda * y[0] - source(dim, y[0]),
                y[3],
                k * y[3] - q * y[2] - y[0],
                y[5],
                k * y[5] - q * y[4] - (y[2] + sgn(y[0]) * y[2] * y[2]),
                y[7],
                k * y[7] - q * y[6],
            ]
        },
        tol,
    )?;
    Ok((samples, -end[4] / end[6]))
}

fn assemble(grid: &Arc<RadialGrid>, samples: &[[f64; 8]], idx: usize, hom: Option<f64>) -> Result<RadialFn> {
    let (mut values, mut derivs) = (Vec::with_capacity(samples.len()), Vec::with_capacity(samples.len()));
    for s in samples {
        let (mut v, mut d) = (s[idx], s[idx + 1]);
        if let Some(t) = hom {
            v += t * s[6];
            d += t * s[7];
        }
        values.push(v);
        derivs.push(d);
    }
    RadialFn::new(grid.clone(), values, derivs, 0)
}

fn aux_tolerances() -> Tolerances {
    Tolerances { atol: 1e-13, rtol: 1e-11 }
}

/// Solution `v` of `-Delta v = (lambda + f'(u)) v + u`, `v = 0` on the boundary.
pub fn solve_v(u: &BranchPoint) -> Result<RadialFn> {
    let grid = u.profile.grid().clone();
    let op = linearised_operator(u, 0)?;
    check_invertible(&op)?;
    if is_trivial(u) {
        return Ok(RadialFn::zeros(grid));
    }
    let v0 = v_origin(u, aux_tolerances())?;
    let (samples, _) = profiles_from_origin(&grid, u, v0, aux_tolerances())?;
    assemble(&grid, &samples, 2, None)
}

/// Solution `w` of `-Delta w = (lambda + f'(u)) w + v + sgn(u) v^2`, `w = 0`
/// on the boundary. `v` enters through `v(0)`, which fixes it as a regular
/// solution of its own equation.
pub fn solve_w(u: &BranchPoint, v: &RadialFn) -> Result<RadialFn> {
    if u.dim != 6 {
        return Err(Error::Precondition("the w problem is posed for N = 6".into()));
    }
    let grid = u.profile.grid().clone();
    let op = linearised_operator(u, 0)?;
    check_invertible(&op)?;
    if is_trivial(u) && v.sup_norm() == 0.0 {
        return Ok(RadialFn::zeros(grid));
    }
    if is_trivial(u) {
        // sgn(0) = 0 leaves the source equal to v
        return solve_dirichlet(&op, v);
    }
    let (samples, t) = profiles_from_origin(&grid, u, v.at_origin(), aux_tolerances())?;
    assemble(&grid, &samples, 4, Some(t))
}

/// Both auxiliary profiles with their residuals.
pub fn solve_aux(u: &BranchPoint) -> Result<AuxProfiles> {
    let v = solve_v(u)?;
    let w = solve_w(u, &v)?;
    let op = linearised_operator(u, 0)?;
    let v_residual = relative_residual(&op, &v, &u.profile, Scheme::Fourth);
    let w_src = w_source(&u.profile, &v)?;
    let w_residual = relative_residual(&op, &w, &w_src, Scheme::Fourth);
    Ok(AuxProfiles { lambda: u.lambda, v, w, v_residual, w_residual })
}

/// `v + sgn(u) v^2`.
pub fn w_source(u: &RadialFn, v: &RadialFn) -> Result<RadialFn> {
    let sgn = |x: f64| {
        if x > 0.0 {
            1.0
        } else if x < 0.0 {
            -1.0
        } else {
            0.0
        }
    };
    let (uu, vv, dv) = (u.values(), v.values(), v.derivatives());
    let values = (0..uu.len()).map(|i| vv[i] + sgn(uu[i]) * vv[i] * vv[i]).collect();
    let derivs = (0..uu.len()).map(|i| dv[i] + 2.0 * sgn(uu[i]) * vv[i] * dv[i]).collect();
    RadialFn::new(v.grid().clone(), values, derivs, 0)
}

/// Smallest-magnitude and lowest eigenvalue of one sector.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorEntry {
    pub l: usize,
    pub min_abs: f64,
    pub lowest: f64,
}

/// A critical sphere `|x| = radius` (or the centre) of `u` at level `sign * lambda / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPoint {
    pub radius: f64,
    pub sign: i8,
    pub u: f64,
    /// `v` at the point, when `v` is known.
    pub v: Option<f64>,
    /// Radial derivative of `v`.
    pub dv: Option<f64>,
    /// `v = sign / 2` within tolerance.
    pub in_v_set: bool,
    /// `grad v` lies in the orthogonal complement of the Hessian kernel.
    pub in_uv_set: bool,
}

impl CriticalPoint {
    pub fn excluded(&self) -> bool {
        self.in_v_set && self.in_uv_set
    }
}

#[derive(Debug, Clone)]
pub struct NondegeneracyReport {
    pub sectors: Vec<SectorEntry>,
    pub l_max: usize,
    /// `l(l+N-2) > max |lambda + f'(u)|` at `l = l_max + 1`, so no kernel beyond.
    pub cutoff_certified: bool,
    pub threshold: f64,
    pub verdict: bool,
    pub plus: Vec<CriticalPoint>,
    pub minus: Vec<CriticalPoint>,
    pub essential: bool,
}

impl NondegeneracyReport {
    pub fn summary(&self) -> Value {
        json!({
            "l_max": self.l_max,
            "cutoff_certified": self.cutoff_certified,
            "threshold": self.threshold,
            "verdict": self.verdict,
            "essential": self.essential,
            "sectors": self.sectors.iter().map(|s| json!({"l": s.l, "min_abs": s.min_abs, "lowest": s.lowest})).collect::<Vec<_>>(),
            "plus": self.plus.iter().map(point_json).collect::<Vec<_>>(),
            "minus": self.minus.iter().map(point_json).collect::<Vec<_>>(),
        })
    }
}

fn point_json(p: &CriticalPoint) -> Value {
    json!({
        "radius": p.radius,
        "sign": p.sign,
        "u": p.u,
        "v": p.v,
        "dv": p.dv,
        "in_v_set": p.in_v_set,
        "in_uv_set": p.in_uv_set,
        "excluded": p.excluded(),
    })
}

/// Critical radii of `u` (the centre and the interior zeros of `u'`).
pub fn critical_radii(u: &RadialFn) -> Vec<f64> {
    let mut out = vec![0.0];
    let r = u.grid().nodes();
    let d = u.derivatives();
    let n = r.len();
    for i in 1..n - 2 {
        if d[i] == 0.0 {
            out.push(r[i]);
        } else if d[i].signum() != d[i + 1].signum() && d[i + 1] != 0.0 {
            if let Ok(x) = brent(|x| Ok(u.eval_deriv(x)), r[i], r[i + 1], 1e-15) {
                out.push(x);
            }
        }
    }
    out
}

/// Points of `Omega_{u, +lambda/2}` and `Omega_{u, -lambda/2}` on the radial profile.
pub fn level_points(u: &BranchPoint) -> (Vec<CriticalPoint>, Vec<CriticalPoint>) {
    let lambda = u.lambda;
    let dmax = u.profile.derivatives().iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for r in critical_radii(&u.profile) {
        let (val, dval) = u.profile.eval_pair(r);
        if dval.abs() > LEVEL_TOL * dmax.max(1.0) && r > 0.0 {
            continue;
        }
        for sign in [1i8, -1] {
            if (val - sign as f64 * lambda / 2.0).abs() <= LEVEL_TOL * lambda.abs() {
                let p = CriticalPoint { radius: r, sign, u: val, v: None, dv: None, in_v_set: false, in_uv_set: true };
                if sign > 0 {
                    plus.push(p);
                } else {
                    minus.push(p);
                }
            }
        }
    }
    (plus, minus)
}

/// Sector-wise spectra of the linearised operator for `l = 0..=l_max`.
pub fn sector_spectrum(u: &BranchPoint, l_max: usize) -> Result<NondegeneracyReport> {
    if l_max < 6 {
        return Err(Error::Precondition(format!("l_max = {l_max} must be at least 6")));
    }
    let base = linearised_operator(u, 0)?;
    let scale = base.scale();
    let threshold = 1e-6 * scale;
    let sectors: Vec<SectorEntry> = (0..=l_max)
        .map(|l| {
            let op = base.with_sector(l);
            SectorEntry { l, min_abs: min_singular_value(&op), lowest: sector_eigenvalue(&op, 0) }
        })
        .collect();
    let verdict = sectors.iter().all(|s| s.min_abs > threshold);
    let l = (l_max + 1) as f64;
    let potential_max = scale - 1.0;
    let cutoff_certified = l * (l + u.dim as f64 - 2.0) > potential_max;
    let (plus, minus) = level_points(u);
    let essential = !(plus.is_empty() && minus.is_empty());
    Ok(NondegeneracyReport { sectors, l_max, cutoff_certified, threshold, verdict, plus, minus, essential })
}

/// Classifies the critical-level points of `u` against `v`.
///
/// At the centre the Hessian is `u''(0) Id`; on an interior critical sphere it
/// is `u''(r) e e^T`. In both cases the radial gradient of `v` lies in the
/// orthogonal complement of the kernel, so a point is excluded exactly when
/// `v = sign / 2` there.
#[derive(Debug, Clone)]
pub struct EssentialReport {
    pub plus: Vec<CriticalPoint>,
    pub minus: Vec<CriticalPoint>,
    /// `Delta u(0) = -(lambda u(0) + f(u(0)))`, nonzero at any level point.
    pub hessian_trace: f64,
    /// Some level point exists.
    pub verdict: bool,
    /// Some level point escapes the excluded set.
    pub usable: bool,
}

impl EssentialReport {
    pub fn summary(&self) -> Value {
        json!({
            "verdict": self.verdict,
            "usable": self.usable,
            "hessian_trace": self.hessian_trace,
            "plus": self.plus.iter().map(point_json).collect::<Vec<_>>(),
            "minus": self.minus.iter().map(point_json).collect::<Vec<_>>(),
        })
    }
}

pub fn essential_nondegeneracy(u: &BranchPoint, v: &RadialFn) -> EssentialReport {
    let (mut plus, mut minus) = level_points(u);
    for p in plus.iter_mut().chain(minus.iter_mut()) {
        let (vv, dv) = v.eval_pair(p.radius);
        p.v = Some(vv);
        p.dv = Some(dv);
        p.in_v_set = (vv - p.sign as f64 * 0.5).abs() <= LEVEL_TOL;
        p.in_uv_set = true;
    }
    let a = u.profile.at_origin();
    let hessian_trace = -(u.lambda * a + source(u.dim, a));
    let verdict = !(plus.is_empty() && minus.is_empty());
    let usable = plus.iter().chain(&minus).any(|p| !p.excluded());
    EssentialReport { plus, minus, hessian_trace, verdict, usable }
}

/// Decomposition of `w_eta(x) = (x - eta) . grad u / 2 + u - lambda v` into
/// `w0(r) = r u'/2 + u - lambda v` and `w1(r) (eta . x/|x|)` with `w1 = -u'/2`.
#[derive(Debug, Clone)]
pub struct WEtaReport {
    pub eta: [f64; 6],
    pub w0: RadialFn,
    pub w1: RadialFn,
    /// Relative residuals of `-Delta_l w = (lambda + f'(u)) w` per sector.
    pub residual0: f64,
    pub residual1: f64,
    /// Relative residual of the full function, `|eta|^2 / N` weighting sector 1.
    pub residual: f64,
    /// `|w0(1) - u'(1)/2| + |w1(1) + u'(1)/2|`.
    pub boundary_error: f64,
    /// `w_eta(0)`.
    pub at_origin: f64,
}

impl WEtaReport {
    /// `w_eta` at a point of `R^6` inside the ball.
    pub fn eval(&self, x: &[f64; 6]) -> f64 {
        let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        let dir = if r > 0.0 { self.eta.iter().zip(x).map(|(e, c)| e * c).sum::<f64>() / r } else { 0.0 };
        self.w0.eval(r) + self.w1.eval(r) * dir
    }
}

fn sector_norms(op: &OperatorSpec, f: &RadialFn) -> (f64, f64) {
    let lf = op.apply_fourth(f.values());
    let w = op.grid().weights();
    let first = usize::from(op.sector() > 0);
    let (mut res, mut size) = (0.0, 0.0);
    for i in first..op.grid().cells() {
        res += w[i] * lf[i] * lf[i];
        let q = op.total_potential(i) * f.values()[i];
        size += w[i] * q * q;
    }
    (res, size)
}

pub fn w_eta(u: &BranchPoint, v: &RadialFn, eta: [f64; 6]) -> Result<WEtaReport> {
    let grid = u.profile.grid().clone();
    let dim = u.dim as f64;
    let lambda = u.lambda;
    let (uu, du) = (u.profile.values(), u.profile.derivatives());
    let r = grid.nodes();
    // u'' from the equation itself
    let d2u: Vec<f64> = (0..r.len())
        .map(|i| {
            let rhs = -lambda * uu[i] - source(u.dim, uu[i]);
            if i == 0 {
                rhs / dim
            } else {
                rhs - (dim - 1.0) / r[i] * du[i]
            }
        })
        .collect();
    let (vv, dv) = (v.values(), v.derivatives());
    let mut w0v = Vec::with_capacity(r.len());
    let mut w0d = Vec::with_capacity(r.len());
    for i in 0..r.len() {
        w0v.push(0.5 * r[i] * du[i] + uu[i] - lambda * vv[i]);
        w0d.push(0.5 * du[i] + 0.5 * r[i] * d2u[i] + du[i] - lambda * dv[i]);
    }
    let w0 = RadialFn::new(grid.clone(), w0v, w0d, 0)?;
    let w1 =
        RadialFn::new(grid.clone(), du.iter().map(|d| -0.5 * d).collect(), d2u.iter().map(|d| -0.5 * d).collect(), 1)?;
    let op0 = linearised_operator(u, 0)?;
    let op1 = op0.with_sector(1);
    let (res0, size0) = sector_norms(&op0, &w0);
    let (res1, size1) = sector_norms(&op1, &w1);
    let eta2 = eta.iter().map(|e| e * e).sum::<f64>() / dim;
    let rel = |a: f64, b: f64| if b > 0.0 { (a / b).sqrt() } else { a.sqrt() };
    let n = r.len() - 1;
    let boundary_error = (w0.values()[n] - 0.5 * du[n]).abs() + (w1.values()[n] + 0.5 * du[n]).abs();
    Ok(WEtaReport {
        eta,
        residual0: rel(res0, size0),
        residual1: rel(res1, size1),
        residual: rel(res0 + eta2 * res1, size0 + eta2 * size1),
        boundary_error,
        at_origin: w0.values()[0],
        w0,
        w1,
    })
}

/// Second-order finite-volume `v` on the grid of `u`, used as an independent
/// cross-check of the shooting route.
pub fn solve_v_fd(u: &BranchPoint) -> Result<RadialFn> {
    let op = linearised_operator(u, 0)?;
    solve_dirichlet(&op, &u.profile)
}

/// `2 v(0) - 1` for the ground state at `lambda`, measured on uniform grids
/// of `n` and `2n` cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CentreValue {
    pub value: f64,
    /// Half-width of the error bar.
    pub error: f64,
    pub cells: [usize; 2],
    /// `v(0)` from shooting on each grid.
    pub shooting: [f64; 2],
    /// `v(0)` from the second-order finite-volume solve on each grid.
    pub finite_volume: [f64; 2],
    /// Richardson extrapolation of the finite-volume values.
    pub extrapolated: f64,
}

impl CentreValue {
    /// The error bar contains zero.
    pub fn straddles_zero(&self) -> bool {
        self.value.abs() <= self.error
    }
}

/// The error bar is the larger of the shooting change under doubling and the
/// gap to the extrapolated finite-volume value, doubled with `v`.
pub fn centre_value(lambda: f64, n: usize) -> Result<CentreValue> {
    let mut shooting = [0.0; 2];
    let mut finite_volume = [0.0; 2];
    let cells = [n, 2 * n];
    for (k, &c) in cells.iter().enumerate() {
        let grid = make_grid(6, c, Grading::Uniform)?.shared();
        let u = solve_bvp(&grid, lambda, 1, DEFAULT_AMPLITUDES)?;
        shooting[k] = solve_v(&u)?.at_origin();
        finite_volume[k] = solve_v_fd(&u)?.at_origin();
    }
    let extrapolated = finite_volume[1] + (finite_volume[1] - finite_volume[0]) / 3.0;
    let spread = (shooting[1] - shooting[0]).abs().max((extrapolated - shooting[1]).abs());
    Ok(CentreValue {
        value: 2.0 * shooting[1] - 1.0,
        error: 2.0 * spread,
        cells,
        shooting,
        finite_volume,
        extrapolated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinear_radial::{solve_bvp, DEFAULT_AMPLITUDES};
    use crate::radial_core::{make_grid, Grading};

    fn ground(lambda: f64, n: usize) -> BranchPoint {
        let g = make_grid(6, n, Grading::Uniform).unwrap().shared();
        solve_bvp(&g, lambda, 1, DEFAULT_AMPLITUDES).unwrap()
    }

    fn trivial(lambda: f64) -> BranchPoint {
        let g = make_grid(6, 128, Grading::Uniform).unwrap().shared();
        BranchPoint {
            dim: 6,
            lambda,
            amplitude: 0.0,
            nodal_count: 1,
            profile: RadialFn::zeros(g),
            shoot_residual: 0.0,
            scan_transitions: 0,
        }
    }

    #[test]
    fn zero_base_gives_zero_profiles() {
        let u = trivial(5.0);
        let aux = solve_aux(&u).unwrap();
        assert_eq!(aux.v.sup_norm(), 0.0);
        assert_eq!(aux.w.sup_norm(), 0.0);
        let report = sector_spectrum(&trivial(0.0), 8).unwrap();
        assert!(report.verdict);
    }

    #[test]
    fn residuals_and_boundary() {
        let u = ground(10.0, 1024);
        let aux = solve_aux(&u).unwrap();
        assert!(aux.v_residual < 1e-8, "{}", aux.v_residual);
        assert!(aux.w_residual < 1e-8, "{}", aux.w_residual);
        assert!(aux.v.at_boundary().abs() < 1e-10 && aux.w.at_boundary().abs() < 1e-10);
        let fd = solve_v_fd(&u).unwrap();
        assert!((fd.at_origin() - aux.v.at_origin()).abs() < 1e-3 * aux.v.sup_norm());
    }

    #[test]
    fn linear_in_source() {
        let u = ground(10.0, 256);
        let op = linearised_operator(&u, 0).unwrap();
        let v1 = solve_dirichlet(&op, &u.profile).unwrap();
        let v2 = solve_dirichlet(&op, &u.profile.scaled(2.0)).unwrap();
        for (a, b) in v1.values().iter().zip(v2.values()) {
            assert!((2.0 * a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn positive_base_source_sign() {
        let u = ground(10.0, 256);
        let v = solve_v(&u).unwrap();
        let s = w_source(&u.profile, &v).unwrap();
        let n = u.profile.values().len() - 1;
        for i in 0..n {
            let x = v.values()[i];
            assert!((s.values()[i] - (x + x * x)).abs() <= 1e-14 * (1.0 + x * x));
        }
    }

    #[test]
    fn sectors_increase_and_generic_level_empty() {
        let u = ground(10.0, 512);
        let report = sector_spectrum(&u, 8).unwrap();
        assert!(report.verdict);
        assert!(report.sectors.windows(2).all(|w| w[1].lowest >= w[0].lowest));
        let v = solve_v(&u).unwrap();
        let e = essential_nondegeneracy(&u, &v);
        assert!(!e.verdict && e.plus.is_empty() && e.minus.is_empty());
    }

    #[test]
    fn w_eta_origin_independent_of_direction() {
        let u = ground(10.0, 512);
        let v = solve_v(&u).unwrap();
        let values: Vec<f64> = [[0.0; 6], [0.3, 0.0, 0.0, 0.0, 0.0, 0.0], [0.1, -0.2, 0.05, 0.0, 0.3, 0.1]]
            .iter()
            .map(|eta| w_eta(&u, &v, *eta).unwrap().eval(&[0.0; 6]))
            .collect();
        let expect = u.profile.at_origin() - u.lambda * v.at_origin();
        for x in values {
            assert!((x - expect).abs() < 1e-10 * expect.abs().max(1.0));
        }
    }
}
