//! Radial solutions of `u'' + ((N-1)/r) u' + lambda u + |u|^{p-1} u = 0`,
//! `p = (N+2)/(N-2)`, on the unit ball with `u(1) = 0`: shooting, matching,
//! Newton refinement on a grid, and the special value `lambda_0` with
//! `2 u(0) = lambda_0`.

use std::sync::Arc;

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::radial_core::grid::check_dim;
use crate::radial_core::ode::{integrate, Tolerances};
use crate::radial_core::{OperatorSpec, RadialFn, RadialGrid, Scheme};
use crate::roots::{bisect_predicate, brent};

/// Amplitudes scanned by [`solve_bvp`] when no bracket is given.
pub const DEFAULT_AMPLITUDES: (f64, f64) = (1e-4, 1e6);
const SCAN_POINTS: usize = 48;

/// Critical exponent `p = (N+2)/(N-2)`.
pub fn exponent(dim: usize) -> f64 {
    (dim as f64 + 2.0) / (dim as f64 - 2.0)
}

/// `f(u) = |u|^{p-1} u`.
pub fn source(dim: usize, u: f64) -> f64 {
    if dim == 6 {
        u.abs() * u
    } else {
        u.abs().powf(exponent(dim) - 1.0) * u
    }
}

/// `f'(u) = p |u|^{p-1}`.
pub fn source_deriv(dim: usize, u: f64) -> f64 {
    if dim == 6 {
        2.0 * u.abs()
    } else {
        let p = exponent(dim);
        p * u.abs().powf(p - 1.0)
    }
}

/// `F(u) = |u|^{p+1} / (p+1)`.
pub fn primitive(dim: usize, u: f64) -> f64 {
    let p = exponent(dim);
    u.abs().powf(p + 1.0) / (p + 1.0)
}

/// Natural length scale of the solution started at `u(0) = a`.
fn length_scale(dim: usize, lambda: f64, a: f64) -> f64 {
    1.0 / (lambda.abs() + a.abs().powf(exponent(dim) - 1.0)).sqrt()
}

/// Taylor start `(r0, u(r0), u'(r0))` of the regular solution.
fn series_start(dim: usize, lambda: f64, a: f64) -> (f64, f64, f64) {
    let n = dim as f64;
    let r0 = 1e-4 * length_scale(dim, lambda, a).min(1.0);
    let c2 = -(lambda * a + source(dim, a)) / (2.0 * n);
    let c4 = -(lambda + source_deriv(dim, a)) * c2 / (4.0 * (n + 2.0));
    let r2 = r0 * r0;
    (r0, a + c2 * r2 + c4 * r2 * r2, 2.0 * c2 * r0 + 4.0 * c4 * r2 * r0)
}

/// Endpoint data of one shot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotEnd {
    /// `u(1)`.
    pub boundary: f64,
    /// `u'(1)`.
    pub slope: f64,
    /// Sign changes strictly inside `(0, 1)` among accepted steps.
    pub zeros: usize,
    /// Sign changes on `(0, 1]`, counting `u(1)` when it has crossed.
    pub crossings: usize,
}

/// Result of [`shoot`].
#[derive(Debug, Clone)]
pub struct Shot {
    pub profile: RadialFn,
    pub boundary: f64,
    pub zeros: usize,
}

fn run_shot(dim: usize, lambda: f64, a: f64, outputs: &[f64], tol: Tolerances) -> Result<(ShotEnd, Vec<[f64; 2]>)> {
    check_dim(dim)?;
    if a == 0.0 || !a.is_finite() {
        return Err(Error::Precondition(format!("amplitude must be finite and nonzero, got {a}")));
    }
    let (r0, u0, du0) = series_start(dim, lambda, a);
    let n = dim as f64;
    let mut last = a.signum();
    let mut crossings = 0usize;
    let mut zeros = 0usize;
    let tr = integrate(
        |r, y: &[f64; 2]| [y[1], -(n - 1.0) / r * y[1] - lambda * y[0] - source(dim, y[0])],
        r0,
        [u0, du0],
        1.0,
        outputs,
        tol,
        |r, y| {
            let s = y[0].signum();
            if s != 0.0 && s != last {
                crossings += 1;
                if r < 1.0 {
                    zeros += 1;
                }
                last = s;
            }
            true
        },
    )?;
    Ok((ShotEnd { boundary: tr.end[0], slope: tr.end[1], zeros, crossings }, tr.samples))
}

/// Shoots from `u(0) = a`, `u'(0) = 0` to `r = 1` without storing a profile.
pub fn shoot_end(dim: usize, lambda: f64, a: f64) -> Result<ShotEnd> {
    Ok(run_shot(dim, lambda, a, &[], Tolerances::default())?.0)
}

/// Shoots on the nodes of `grid`, returning the sampled profile, `u(1)` and the
/// number of interior sign changes.
pub fn shoot(grid: &Arc<RadialGrid>, lambda: f64, a: f64) -> Result<Shot> {
    shoot_with(grid, lambda, a, Tolerances::default())
}

pub fn shoot_with(grid: &Arc<RadialGrid>, lambda: f64, a: f64, tol: Tolerances) -> Result<Shot> {
    let dim = grid.dim();
    let (r0, _, _) = series_start(dim, lambda, a);
    let nodes = grid.nodes();
    let split = nodes.partition_point(|&r| r <= r0);
    let (end, samples) = run_shot(dim, lambda, a, &nodes[split..], tol)?;
    let n = dim as f64;
    let c2 = -(lambda * a + source(dim, a)) / (2.0 * n);
    let c4 = -(lambda + source_deriv(dim, a)) * c2 / (4.0 * (n + 2.0));
    let mut values = Vec::with_capacity(nodes.len());
    let mut derivs = Vec::with_capacity(nodes.len());
    for &r in &nodes[..split] {
        let r2 = r * r;
        values.push(a + c2 * r2 + c4 * r2 * r2);
        derivs.push(2.0 * c2 * r + 4.0 * c4 * r2 * r);
    }
    for s in samples {
        values.push(s[0]);
        derivs.push(s[1]);
    }
    let profile = RadialFn::new(grid.clone(), values, derivs, 0)?;
    Ok(Shot { profile, boundary: end.boundary, zeros: end.zeros })
}

/// One radial solution of the Dirichlet problem.
#[derive(Debug, Clone)]
pub struct BranchPoint {
    pub dim: usize,
    pub lambda: f64,
    pub amplitude: f64,
    /// Number of nodal regions `m`.
    pub nodal_count: usize,
    pub profile: RadialFn,
    /// `|u(1)|` of the final shot.
    pub shoot_residual: f64,
    /// Sign changes of the matching function seen in the amplitude scan.
    pub scan_transitions: usize,
}

impl BranchPoint {
    pub fn grid_n(&self) -> usize {
        self.profile.grid().cells()
    }

    pub fn summary(&self) -> Value {
        json!({
            "N": self.dim,
            "lambda": self.lambda,
            "amplitude": self.amplitude,
            "nodal_count": self.nodal_count,
            "residual": self.shoot_residual,
            "grid_n": self.grid_n(),
        })
    }

    /// Relative residual of the equation under the fourth-order operator.
    pub fn ode_residual(&self) -> f64 {
        equation_residual(&self.profile, self.lambda)
    }
}

/// `|L u - f(u)| / |f(u)|` in the weighted discrete `L^2` sense, with
/// `L = -Delta - lambda` of fourth order.
pub fn equation_residual(u: &RadialFn, lambda: f64) -> f64 {
    let dim = u.grid().dim();
    let op = OperatorSpec::free(u.grid().clone(), 0, lambda).expect("finite shift");
    let lu = op.apply_fourth(u.values());
    let w = u.grid().weights();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..u.grid().cells() {
        let f = source(dim, u.values()[i]);
        num += w[i] * (lu[i] - f).powi(2);
        den += w[i] * f * f;
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// Refines a bracket `[lo, hi]` across which the crossing count changes from
/// `below` to `above` (either order), then polishes on `u(1)` with Brent.
fn refine_match(
    eval: &(impl Fn(f64) -> Result<ShotEnd> + Sync),
    lo: f64,
    hi: f64,
    target: usize,
    rising: bool,
) -> Result<f64> {
    // predicate "crossings >= target" is false at lo when rising
    let pred = |x: f64| -> Result<bool> {
        let c = eval(x)?.crossings >= target;
        Ok(if rising { c } else { !c })
    };
    let width = 1e-7 * lo.abs().max(hi.abs());
    let (a, b) = bisect_predicate(pred, lo, hi, width)?;
    let fa = eval(a)?;
    let fb = eval(b)?;
    if fa.boundary.signum() == fb.boundary.signum() {
        // the transition happened inside, not at r = 1
        return Err(Error::NotConverged(format!("no boundary crossing in [{a}, {b}]")));
    }
    brent(|x| Ok(eval(x)?.boundary), a, b, 1e-15 * a.abs().max(b.abs()))
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect()
}

/// Positive amplitude `a` of the `m`-nodal solution at fixed `lambda`, found by
/// scanning `bracket` log-uniformly and refining the first transition.
/// Returns the amplitude and the number of transitions seen in the scan.
pub fn match_amplitude(dim: usize, lambda: f64, m: usize, bracket: (f64, f64)) -> Result<(f64, usize)> {
    check_dim(dim)?;
    if m == 0 {
        return Err(Error::Precondition("nodal count starts at 1".into()));
    }
    let (lo, hi) = bracket;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::Precondition(format!("amplitude bracket [{lo}, {hi}] invalid")));
    }
    let eval = |a: f64| shoot_end(dim, lambda, a);
    let grid = log_space(lo, hi, SCAN_POINTS);
    let ends: Vec<Result<ShotEnd>> = grid.par_iter().map(|&a| eval(a)).collect();
    let mut counts = Vec::with_capacity(grid.len());
    for e in ends {
        counts.push(e?.crossings);
    }
    let mut transitions = 0;
    let mut first = None;
    for k in 0..grid.len() - 1 {
        let (c0, c1) = (counts[k], counts[k + 1]);
        let up = c0 < m && c1 >= m;
        let down = c0 >= m && c1 < m;
        if up || down {
            transitions += 1;
            if first.is_none() {
                first = Some((k, up));
            }
        }
    }
    let (k, rising) = first.ok_or(Error::NoSignChange { dim, lambda, nodal: m })?;
    let a = refine_match(&eval, grid[k], grid[k + 1], m, rising)?;
    Ok((a, transitions))
}

/// `m`-nodal radial solution at fixed `lambda` with amplitude in `bracket`.
pub fn solve_bvp(grid: &Arc<RadialGrid>, lambda: f64, m: usize, bracket: (f64, f64)) -> Result<BranchPoint> {
    let dim = grid.dim();
    let (a, transitions) = match_amplitude(dim, lambda, m, bracket)?;
    point_at(grid, lambda, a, m, transitions)
}

fn point_at(grid: &Arc<RadialGrid>, lambda: f64, a: f64, m: usize, transitions: usize) -> Result<BranchPoint> {
    let shot = shoot(grid, lambda, a)?;
    let count = nodal_count(&shot.profile);
    if count + 1 != m {
        return Err(Error::NotConverged(format!("profile has {count} sign changes, expected {}", m - 1)));
    }
    Ok(BranchPoint {
        dim: grid.dim(),
        lambda,
        amplitude: a,
        nodal_count: m,
        profile: shot.profile,
        shoot_residual: shot.boundary.abs(),
        scan_transitions: transitions,
    })
}

/// The `lambda` at which the solution with fixed amplitude `a` has `m` nodal
/// regions, searched in `window`; the window is scanned on `samples` points.
pub fn match_lambda(dim: usize, a: f64, m: usize, window: (f64, f64), samples: usize) -> Result<f64> {
    check_dim(dim)?;
    let (lo, hi) = window;
    let eval = |l: f64| shoot_end(dim, l, a);
    let samples = samples.max(2);
    let pts: Vec<f64> = (0..samples).map(|k| lo + (hi - lo) * k as f64 / (samples - 1) as f64).collect();
    let ends: Vec<Result<ShotEnd>> = pts.par_iter().map(|&l| eval(l)).collect();
    let mut prev: Option<usize> = None;
    for (k, e) in ends.into_iter().enumerate() {
        let c = e?.crossings;
        if let Some(p) = prev {
            if p < m && c >= m {
                return refine_match(&eval, pts[k - 1], pts[k], m, true);
            }
        }
        prev = Some(c);
    }
    Err(Error::BranchLost { amplitude: a, lo, hi })
}

/// Solution with amplitude `a` and `m` nodal regions; `lambda` from [`match_lambda`].
pub fn solve_at_amplitude(grid: &Arc<RadialGrid>, a: f64, m: usize, window: (f64, f64)) -> Result<BranchPoint> {
    let lambda = match_lambda(grid.dim(), a, m, window, 24)?;
    point_at(grid, lambda, a, m, 1)
}

/// Sign changes of the nodal values on `(0, 1)`, ignoring samples below
/// `1e-10 * max |f|`.
pub fn nodal_count(f: &RadialFn) -> usize {
    let floor = 1e-10 * f.sup_norm();
    let n = f.values().len();
    let mut last = 0.0;
    let mut count = 0;
    for &v in &f.values()[..n - 1] {
        if v.abs() <= floor {
            continue;
        }
        let s = v.signum();
        if last != 0.0 && s != last {
            count += 1;
        }
        last = s;
    }
    count
}

/// `J(u) = 1/2 int |grad u|^2 - lambda/2 int u^2 - int F(u)`.
pub fn energy(u: &RadialFn, lambda: f64) -> f64 {
    let dim = u.grid().dim();
    u.integrate_map(|_, v, d| 0.5 * d * d - 0.5 * lambda * v * v - primitive(dim, v))
}

/// Evidence that `lambda_0` solves `2 u_{lambda_0}(0) = lambda_0`.
#[derive(Debug, Clone)]
pub struct Lambda0Certificate {
    pub lambda0: f64,
    pub ground: BranchPoint,
    /// `2 u(0) - lambda_0` read from the stored profile.
    pub gap: f64,
    /// `u(0) - lambda_0`, the residual of the literal reading `lambda_0 = max u`.
    pub literal_gap: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
}

impl Lambda0Certificate {
    pub fn summary(&self) -> Value {
        json!({
            "lambda0": self.lambda0,
            "u0": self.ground.amplitude,
            "gap": self.gap,
            "literal_gap": self.literal_gap,
            "bracket": [self.bracket.0, self.bracket.1],
            "iterations": self.iterations,
            "ground_state": self.ground.summary(),
        })
    }
}

/// Ground-state amplitude at `lambda`.
pub fn ground_amplitude(dim: usize, lambda: f64) -> Result<f64> {
    Ok(match_amplitude(dim, lambda, 1, DEFAULT_AMPLITUDES)?.0)
}

/// Root of `g(lambda) = 2 u_lambda(0) - lambda` along the ground states.
pub fn find_lambda0(grid: &Arc<RadialGrid>, bracket: (f64, f64)) -> Result<Lambda0Certificate> {
    let dim = grid.dim();
    let (mut lo, mut hi) = bracket;
    let g = |l: f64| -> Result<f64> { Ok(2.0 * ground_amplitude(dim, l)? - l) };
    let no_root = || Error::NoRootInBracket { lo: bracket.0, hi: bracket.1 };
    let mut glo = g(lo).map_err(|_| no_root())?;
    let ghi = g(hi).map_err(|_| no_root())?;
    if glo.signum() == ghi.signum() {
        return Err(no_root());
    }
    let mut iterations = 0;
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid)?;
        iterations += 1;
        if gm.signum() == glo.signum() {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    let (mut x0, mut x1) = (lo, hi);
    let (mut g0, mut g1) = (glo, g(hi)?);
    for _ in 0..3 {
        if g1 == g0 {
            break;
        }
        let x2 = x1 - g1 * (x1 - x0) / (g1 - g0);
        if !(x2 > bracket.0 && x2 < bracket.1) {
            break;
        }
        x0 = x1;
        g0 = g1;
        x1 = x2;
        g1 = g(x1)?;
        iterations += 1;
    }
    let lambda0 = if g1.abs() <= g0.abs() { x1 } else { x0 };
    let a = ground_amplitude(dim, lambda0)?;
    let ground = point_at(grid, lambda0, a, 1, 1)?;
    let u0 = ground.profile.at_origin();
    Ok(Lambda0Certificate { lambda0, gap: 2.0 * u0 - lambda0, literal_gap: u0 - lambda0, ground, bracket, iterations })
}

/// Outcome of [`newton_refine`].
#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub solution: RadialFn,
    /// `|u* - guess|` in `H_0^1`.
    pub distance_h1: f64,
    /// `L^{3/2}` norm of the equation residual of the guess.
    pub initial_residual: f64,
    /// Sup norm of each accepted update.
    pub updates: Vec<f64>,
    /// Multiplier of the constraint direction (zero without a constraint).
    pub multiplier: f64,
}

const MAX_NEWTON_STEPS: usize = 200;

/// Newton iteration for `-Delta u - lambda u - f(u) = 0` on the grid of
/// `guess`, with the fourth-order operator and backtracking on the
/// `L^{3/2}` residual.
pub fn newton_refine(guess: &RadialFn, lambda: f64) -> Result<NewtonOutcome> {
    newton_core(guess, lambda, None)
}

/// Newton iteration for the projected problem
/// `-Delta u - lambda u - f(u) = c g`, `int (u - guess) g = 0`:
/// the correction is kept orthogonal to `g` and the equation is solved up to a
/// multiple of `g`.
pub fn newton_refine_projected(guess: &RadialFn, lambda: f64, g: &RadialFn) -> Result<NewtonOutcome> {
    if g.grid() != guess.grid() {
        return Err(Error::GridMismatch);
    }
    newton_core(guess, lambda, Some(g.values()))
}

fn newton_core(guess: &RadialFn, lambda: f64, constraint: Option<&[f64]>) -> Result<NewtonOutcome> {
    let grid = guess.grid().clone();
    let dim = grid.dim();
    let n = grid.cells();
    let op = OperatorSpec::free(grid.clone(), 0, lambda)?;
    let w = grid.weights().to_vec();
    let g: Vec<f64> = match constraint {
        Some(g) => {
            let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if !(scale > 0.0) {
                return Err(Error::Precondition("constraint direction vanishes".into()));
            }
            let mut g: Vec<f64> = g.iter().map(|v| v / scale).collect();
            g[n] = 0.0;
            g
        }
        None => Vec::new(),
    };
    let residual = |u: &[f64], c: f64| -> Vec<f64> {
        let mut r = op.apply_fourth(u);
        for i in 0..n {
            r[i] -= source(dim, u[i]);
            if !g.is_empty() {
                r[i] -= c * g[i];
            }
        }
        r[n] = u[n];
        r
    };
    // L^{3/2}-type merit: scale invariant for concentrated profiles
    let merit = |r: &[f64]| -> f64 { r.iter().zip(&w).map(|(ri, wi)| wi * ri.abs().powf(1.5)).sum() };
    let u0 = guess.values().to_vec();
    let mut u = u0.clone();
    let mut c = 0.0;
    let initial_residual =
        RadialFn::from_values(grid.clone(), residual(&u, 0.0), 0).and_then(|f| f.lp_norm(1.5)).unwrap_or(f64::NAN);
    let mut updates = Vec::new();
    let mut converged = false;
    for _ in 0..MAX_NEWTON_STEPS {
        let r = residual(&u, c);
        let m0 = merit(&r);
        let mut jac = op.matrix(Scheme::Fourth);
        for i in 0..n {
            jac.add(i, i, -source_deriv(dim, u[i]));
        }
        let lu = jac.factor()?;
        let (delta, dc) = if g.is_empty() {
            (lu.solve(&r), 0.0)
        } else {
            // bordered system [J, -g; (w g)^T, 0] by block elimination
            let a = lu.solve(&r);
            let b = lu.solve(&g);
            let wg = |x: &[f64]| -> f64 { x.iter().zip(&g).zip(&w).map(|((xi, gi), wi)| xi * gi * wi).sum() };
            let drift: Vec<f64> = u.iter().zip(&u0).map(|(a, b)| a - b).collect();
            let denom = wg(&b);
            if denom == 0.0 || !denom.is_finite() {
                return Err(Error::JacobianSingular);
            }
            let dc = (wg(&drift) - wg(&a)) / denom;
            (a.iter().zip(&b).map(|(ai, bi)| ai + dc * bi).collect::<Vec<_>>(), dc)
        };
        let size = delta.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        if !size.is_finite() {
            return Err(Error::Diverged("non-finite Newton update".into()));
        }
        let scale = 1.0 + u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if size <= 1e-11 * scale {
            // below tolerance the merit sits at round-off and a line search is meaningless
            u.iter_mut().zip(&delta).for_each(|(a, d)| *a -= d);
            c -= dc;
            updates.push(size);
            converged = true;
            break;
        }
        let mut t = 1.0;
        let (trial, tc) = loop {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a - t * d).collect();
            let tc = c - t * dc;
            if g.is_empty() && merit(&residual(&trial, tc)) > (1.0 - 1e-4 * t) * m0 && t > 1e-6 {
                t *= 0.5;
                continue;
            }
            break (trial, tc);
        };
        u = trial;
        c = tc;
        updates.push(t * size);
    }
    if !converged {
        return Err(Error::Diverged(format!("no convergence after {} steps", updates.len())));
    }
    let solution = RadialFn::from_values(grid.clone(), u, 0)?;
    let diff: Vec<f64> = solution.values().iter().zip(guess.values()).map(|(a, b)| a - b).collect();
    let distance_h1 = RadialFn::from_values(grid, diff, 0)?.h1_seminorm();
    Ok(NewtonOutcome { solution, distance_h1, initial_residual, updates, multiplier: c })
}
