//! One-bubble ansatz on top of the ground state at `lambda_0`, its residual,
//! the reduced-energy expansion and the choice of construction.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{Matrix6, SymmetricEigen, Vector6};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::bubble::{self, d2, kernel_psi, project_bubble, talenti_radial, talenti_radial_deriv, BubbleParams, Point};
use crate::error::{Error, Result};
use crate::fit::{least_squares, power_law, LinearFit, PowerFit};
use crate::linear_aux::{solve_aux, AuxProfiles, CriticalPoint, EssentialReport};
use crate::nonlinear_radial::{
    newton_refine, newton_refine_projected, solve_bvp, source, BranchPoint, NewtonOutcome, DEFAULT_AMPLITUDES,
};
use crate::radial_core::grid::sphere_area;
use crate::radial_core::quadrature::adaptive;
use crate::radial_core::stencil::DiffOps;
use crate::radial_core::{make_grid, Grading, RadialFn};

pub use crate::nonlinear_radial::energy;

/// Default exponent of the centre shift `|eps|^s` in the shifted construction.
pub const DEFAULT_S: f64 = 0.75;
/// Required number of nodes per bubble scale near the core.
pub const CORE_NODES: f64 = 20.0;
/// Minimum number of rows in a sweep fit.
pub const MIN_FIT_POINTS: usize = 6;

/// How the bubble centre and scale follow `eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum Construction {
    /// `xi = xi_0`, `mu = |eps| tau`.
    Fixed,
    /// `xi = xi_0 + |eps|^s e`, `mu = |eps|^(1+s) tau`.
    Shifted { direction: Point },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BubbleSpec {
    pub xi0: Point,
    pub beta: i8,
    pub tau: f64,
    pub construction: Construction,
}

#[derive(Debug, Clone)]
pub struct AnsatzSpec {
    pub base: BranchPoint,
    pub aux: AuxProfiles,
    pub eps: f64,
    pub bubbles: Vec<BubbleSpec>,
    pub s: f64,
}

impl AnsatzSpec {
    pub fn new(base: BranchPoint, aux: AuxProfiles, eps: f64, bubbles: Vec<BubbleSpec>, s: f64) -> Result<Self> {
        if !eps.is_finite() {
            return Err(Error::Precondition(format!("eps = {eps} is not finite")));
        }
        if !(s > 0.5 && s < 1.0) {
            return Err(Error::Precondition(format!("shift exponent s = {s} must lie in (1/2, 1)")));
        }
        if !bubbles.is_empty() && eps == 0.0 {
            return Err(Error::Precondition("bubbles need eps != 0 to fix their scale".into()));
        }
        for b in &bubbles {
            if b.beta != 1 && b.beta != -1 {
                return Err(Error::Precondition(format!("bubble sign {} must be +1 or -1", b.beta)));
            }
            if !(b.tau > 0.0 && b.tau.is_finite()) {
                return Err(Error::Precondition(format!("tau = {} must be positive", b.tau)));
            }
        }
        let g = base.profile.grid();
        if aux.v.grid() != g || aux.w.grid() != g {
            return Err(Error::GridMismatch);
        }
        Ok(Self { base, aux, eps, bubbles, s })
    }

    pub fn lambda(&self) -> f64 {
        self.base.lambda + self.eps
    }

    pub fn mu_bar(&self, c: &Construction) -> f64 {
        match c {
            Construction::Fixed => self.eps.abs(),
            Construction::Shifted { .. } => self.eps.abs().powf(1.0 + self.s),
        }
    }

    /// Concrete bubble parameters at this `eps`.
    pub fn params(&self) -> Result<Vec<BubbleParams>> {
        self.bubbles
            .iter()
            .map(|b| {
                let mut xi = b.xi0;
                if let Construction::Shifted { direction } = b.construction {
                    let rho = self.eps.abs().powf(self.s);
                    xi.iter_mut().zip(direction).for_each(|(x, e)| *x += rho * e);
                }
                BubbleParams::new(b.tau * self.mu_bar(&b.construction), xi, b.beta)
            })
            .collect()
    }

    /// Smallest bubble scale, or `None` without bubbles.
    pub fn smallest_mu(&self) -> Result<Option<f64>> {
        Ok(self.params()?.iter().map(|p| p.mu).reduce(f64::min))
    }
}

/// `z = u + eps v + eps^2 w`.
pub fn assemble_z(base: &RadialFn, aux: &AuxProfiles, eps: f64) -> Result<RadialFn> {
    base.axpy(eps, &aux.v)?.axpy(eps * eps, &aux.w)
}

/// The ansatz `V = z + beta W_{mu,0}` as a radial function; needs at most one
/// bubble, centred at the origin.
pub fn assemble_ansatz(spec: &AnsatzSpec) -> Result<RadialFn> {
    let z = assemble_z(&spec.base.profile, &spec.aux, spec.eps)?;
    let params = spec.params()?;
    match params.as_slice() {
        [] => Ok(z),
        [p] if p.is_centred() => {
            let (mu, beta) = (p.mu, p.beta as f64);
            let c = bubble::projection_shift(mu);
            let w = RadialFn::from_fn(z.grid().clone(), 0, |r| {
                (beta * (talenti_radial(mu, r) - c), beta * talenti_radial_deriv(mu, r))
            })?;
            z.axpy(1.0, &w)
        }
        _ => Err(Error::RadialModeViolation),
    }
}

/// Pointwise ansatz for arbitrary bubble configurations; off-centre
/// projections use the two-term expansion.
pub fn ansatz_at(spec: &AnsatzSpec, x: &Point) -> Result<f64> {
    let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
    if r > 1.0 {
        return Err(Error::Precondition(format!("|x| = {r} lies outside the unit ball")));
    }
    let (u, v, w) = (&spec.base.profile, &spec.aux.v, &spec.aux.w);
    let z = u.eval(r) + spec.eps * v.eval(r) + spec.eps * spec.eps * w.eval(r);
    let bubbles: f64 = spec.params()?.iter().map(|p| p.beta as f64 * project_bubble(p, x)).sum();
    Ok(z + bubbles)
}

/// Radius at which `|V - V(0)|` first reaches `|V(0)| / 2`, rescaled to the
/// bubble parameter (`U` halves at `0.6436 mu`); 1 if it never does.
fn core_scale(v: &RadialFn) -> f64 {
    let v0 = v.at_origin();
    let r = v.grid().nodes();
    for (i, &x) in v.values().iter().enumerate() {
        if (x - v0).abs() >= 0.5 * v0.abs() && i > 0 {
            let half = (2f64.sqrt() - 1.0).sqrt();
            return (r[i] / half).min(1.0);
        }
    }
    1.0
}

/// Checks that the grid carries [`CORE_NODES`] nodes per core scale `mu`.
pub fn check_resolution(v: &RadialFn, mu: f64) -> Result<()> {
    let spacing = v.grid().max_spacing_below(mu);
    let limit = mu / CORE_NODES;
    if spacing > limit {
        return Err(Error::UnderResolved { spacing, limit });
    }
    Ok(())
}

/// Pointwise `-Delta V - lambda V - |V| V` with fourth-order stencils.
pub fn residual_values(v: &RadialFn, lambda: f64) -> Vec<f64> {
    let grid = v.grid();
    let ops = DiffOps::new(grid, 1.0);
    let r = grid.nodes();
    let dim = grid.dim();
    let n = dim as f64;
    let f = v.values();
    (0..f.len())
        .map(|i| {
            let d2 = DiffOps::apply(&ops.d2[i], f);
            let lap = if i == 0 { n * d2 } else { d2 + (n - 1.0) / r[i] * DiffOps::apply(&ops.d1[i], f) };
            -lap - lambda * f[i] - source(dim, f[i])
        })
        .collect()
}

/// `|-Delta V - lambda V - |V| V|_{L^{3/2}(B_1)}`.
///
/// Refuses grids with fewer than [`CORE_NODES`] nodes per core scale, where the
/// core scale is read off the profile itself.
pub fn residual_norm(v: &RadialFn, lambda: f64) -> Result<f64> {
    check_resolution(v, core_scale(v))?;
    let res = residual_values(v, lambda);
    RadialFn::from_values(v.grid().clone(), res, 0)?.lp_norm(1.5)
}

/// The three terms of the reduced-energy expansion at a concentration point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpansionTerms {
    pub level: f64,
    pub linear: f64,
    pub cubic: f64,
}

impl ExpansionTerms {
    pub fn total(&self) -> f64 {
        self.level + self.linear + self.cubic
    }
}

/// `d1 (lambda0/2 + beta u) mu^2 + eps d1 (1/2 + beta v) mu^2 + 11/9 d2 mu^3`
/// with `d2 = d2(u)`.
pub fn expansion_terms(lambda0: f64, u: f64, v: f64, beta: i8, mu: f64, eps: f64) -> ExpansionTerms {
    let d1 = bubble::d1_closed();
    let b = beta as f64;
    let m2 = mu * mu;
    ExpansionTerms {
        level: d1 * (lambda0 / 2.0 + b * u) * m2,
        linear: eps * d1 * (0.5 + b * v) * m2,
        cubic: 11.0 / 9.0 * d2(u) * m2 * mu,
    }
}

pub fn expansion_e(lambda0: f64, u: f64, v: f64, beta: i8, mu: f64, eps: f64) -> f64 {
    expansion_terms(lambda0, u, v, beta, mu, eps).total()
}

/// `P(tau) = -a tau^2 + 11/9 d2 tau^3`.
pub fn reduced_profile(a: f64, d2: f64, tau: f64) -> f64 {
    -a * tau * tau + 11.0 / 9.0 * d2 * tau.powi(3)
}

/// Positive minimiser `6a / (11 d2)` of [`reduced_profile`].
pub fn tau_star(a: f64, d2: f64) -> Result<f64> {
    if !(a > 0.0 && d2 > 0.0) || !a.is_finite() || !d2.is_finite() {
        return Err(Error::InvalidTauData { a, d2 });
    }
    Ok(6.0 * a / (11.0 * d2))
}

/// A concentration candidate `xi_0` at level `sign * lambda_0 / 2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub xi: Point,
    pub sign: i8,
    pub u: f64,
    pub v: f64,
    /// Unit kernel direction of the Hessian of `u` and `grad v` along it.
    pub kernel_slope: Option<(Point, f64)>,
    pub in_v_set: bool,
    pub in_uv_set: bool,
}

impl Candidate {
    /// Radial level point; the representative centre is `radius e_1`.
    pub fn from_critical_point(p: &CriticalPoint) -> Self {
        let mut xi = [0.0; 6];
        xi[0] = p.radius;
        Self {
            xi,
            sign: p.sign,
            u: p.u,
            v: p.v.unwrap_or(f64::NAN),
            kernel_slope: None,
            in_v_set: p.in_v_set,
            in_uv_set: p.in_uv_set,
        }
    }

    /// General point with explicit `grad v` and Hessian of `u`. The kernel is
    /// spanned by eigenvectors whose eigenvalue is below `tol` times the
    /// largest one in magnitude.
    pub fn from_hessian(xi: Point, sign: i8, u: f64, v: f64, grad_v: Point, hessian: [[f64; 6]; 6], tol: f64) -> Self {
        let h = Matrix6::from_fn(|i, j| 0.5 * (hessian[i][j] + hessian[j][i]));
        let eig = SymmetricEigen::new(h);
        let top = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
        let g = Vector6::from_column_slice(&grad_v);
        let mut proj = Vector6::zeros();
        for k in 0..6 {
            if eig.eigenvalues[k].abs() <= tol * top {
                let e = eig.eigenvectors.column(k);
                proj += e * e.dot(&g);
            }
        }
        let norm = proj.norm();
        let scale = g.norm().max(1.0);
        let in_uv_set = norm <= tol * scale;
        let kernel_slope = (!in_uv_set).then(|| {
            let e = proj / norm;
            let mut d = [0.0; 6];
            d.iter_mut().zip(e.iter()).for_each(|(a, b)| *a = *b);
            (d, norm)
        });
        let in_v_set = (v - sign as f64 * 0.5).abs() <= crate::linear_aux::LEVEL_TOL;
        Self { xi, sign, u, v, kernel_slope, in_v_set, in_uv_set }
    }
}

/// The bubbles chosen for a set of candidates, with the common sign of `eps`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    pub eps_sign: i8,
    pub bubbles: Vec<BubbleSpec>,
    /// `a` of the reduced profile for each bubble.
    pub slopes: Vec<f64>,
}

/// Case 1 where `xi_0` avoids the `v` level set, case 2 along a kernel
/// direction otherwise; excluded points are skipped.
pub fn choose_bubbles(candidates: &[Candidate]) -> Result<Selection> {
    let d1 = bubble::d1_closed();
    let mut eps_sign = 0i8;
    let mut bubbles = Vec::new();
    let mut slopes = Vec::new();
    for c in candidates {
        let beta = -c.sign;
        let (a, sign, construction) = if !c.in_v_set {
            let m = 0.5 + beta as f64 * c.v;
            (d1 * m.abs(), -(m.signum() as i8), Construction::Fixed)
        } else if !c.in_uv_set {
            let Some((direction, slope)) = c.kernel_slope else { continue };
            if slope == 0.0 {
                continue;
            }
            (d1 * slope.abs(), -(slope.signum() as i8), Construction::Shifted { direction })
        } else {
            continue;
        };
        if eps_sign != 0 && sign != eps_sign {
            return Err(Error::InconsistentEpsilonSign);
        }
        eps_sign = sign;
        let tau = tau_star(a, d2(c.u))?;
        bubbles.push(BubbleSpec { xi0: c.xi, beta, tau, construction });
        slopes.push(a);
    }
    if bubbles.is_empty() {
        return Err(Error::AllPointsExcluded);
    }
    Ok(Selection { eps_sign, bubbles, slopes })
}

/// Builds the ansatz spec at `|eps| = eps_magnitude` from the level points of a
/// non-degeneracy report.
pub fn select_construction(
    base: &BranchPoint,
    aux: &AuxProfiles,
    report: &EssentialReport,
    eps_magnitude: f64,
    s: f64,
) -> Result<AnsatzSpec> {
    if !report.verdict {
        return Err(Error::Precondition("no critical point of u at level +-lambda/2".into()));
    }
    let candidates: Vec<Candidate> =
        report.plus.iter().chain(&report.minus).map(Candidate::from_critical_point).collect();
    let sel = choose_bubbles(&candidates)?;
    AnsatzSpec::new(base.clone(), aux.clone(), sel.eps_sign as f64 * eps_magnitude.abs(), sel.bubbles, s)
}

/// `-Delta Psi^0 = 2 U Psi^0` on the grid of `like`: the `H_0^1` dual of the
/// dilation kernel of a centred bubble.
pub fn dilation_kernel(like: &RadialFn, mu: f64) -> Result<RadialFn> {
    let p = BubbleParams::centred(mu, 1)?;
    let vals = like
        .grid()
        .nodes()
        .iter()
        .map(|&r| {
            let mut x = [0.0; 6];
            x[0] = r;
            2.0 * talenti_radial(mu, r) * kernel_psi(0, &p, &x)
        })
        .collect();
    RadialFn::from_values(like.grid().clone(), vals, 0)
}

/// Correction `phi` of the centred one-bubble ansatz orthogonal to the
/// dilation kernel, by bordered Newton at fixed `mu`.
pub fn refine_ansatz(spec: &AnsatzSpec) -> Result<NewtonOutcome> {
    let v = assemble_ansatz(spec)?;
    let mu = spec.smallest_mu()?.ok_or(Error::RadialModeViolation)?;
    check_resolution(&v, mu)?;
    let g = dilation_kernel(&v, mu)?;
    newton_refine_projected(&v, spec.lambda(), &g)
}

/// Unconstrained Newton from the ansatz.
pub fn refine_ansatz_full(spec: &AnsatzSpec) -> Result<NewtonOutcome> {
    let v = assemble_ansatz(spec)?;
    if let Some(mu) = spec.smallest_mu()? {
        check_resolution(&v, mu)?;
    }
    newton_refine(&v, spec.lambda())
}

fn ball_integral(f: impl Fn(f64) -> f64, breaks: &[f64], tol: f64) -> f64 {
    let mut pts = vec![0.0];
    pts.extend(breaks.iter().copied().filter(|&b| b > 0.0 && b < 1.0));
    pts.push(1.0);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let share = tol / (pts.len() - 1) as f64;
    let total: f64 = pts.windows(2).map(|w| adaptive(|r| f(r) * r.powi(5), w[0], w[1], share).0).sum();
    sphere_area(6) * total
}

/// `J_lambda(z + beta W_mu) - J_lambda(z) - (1/6) int_{R^6} U^3` for a centred bubble.
///
/// Evaluated through an exact rearrangement that integrates by parts against
/// `-Delta W = U^2` and keeps the large self-interaction terms in closed form,
/// so the small difference is not lost to cancellation.
pub fn bubble_excess(z: &RadialFn, lambda: f64, mu: f64, beta: i8) -> Result<f64> {
    if z.grid().dim() != 6 {
        return Err(Error::InvalidDimension(z.grid().dim()));
    }
    let b = beta as f64;
    let c = bubble::projection_shift(mu);
    let u = |r: f64| talenti_radial(mu, r);
    let m = mu * mu;
    let t = 1.0 + m;
    // (1/6) int_{|x|>1} U^3, exact
    let outer = PI.powi(3) * 24f64.powi(3) * m.powi(3) / 12.0
        * (1.0 / (3.0 * t.powi(3)) - m / (2.0 * t.powi(4)) + m * m / (5.0 * t.powi(5)));
    let mut breaks = Vec::new();
    let mut r = mu / 8.0;
    while r < 1.0 {
        breaks.push(r);
        r *= 2.0;
    }
    // the kink of |z + beta W|^3 sits where the bubble overtakes z
    let g = |r: f64| z.eval(r) + b * (u(r) - c);
    if let Some(w) = breaks.windows(2).find(|w| g(w[0]).signum() != g(w[1]).signum()) {
        if let Ok(root) = crate::roots::brent(|r| Ok(g(r)), w[0], w[1], 1e-14) {
            breaks.push(root);
        }
    }
    let tol = 1e-7 * mu.powi(3);
    let bulk = (c / 2.0) * ball_integral(|r| u(r) * u(r), &breaks, tol) - c * c * ball_integral(u, &breaks, tol)
        + c.powi(3) / 3.0 * PI.powi(3) / 6.0;
    let cross = ball_integral(
        |r| {
            let (zr, ur) = (z.eval(r), u(r));
            let w = ur - c;
            let k = ((zr + b * w).abs().powi(3) - zr.abs().powi(3) - w.powi(3)) / 3.0;
            b * zr * ur * ur - lambda * b * zr * w - 0.5 * lambda * w * w - k
        },
        &breaks,
        tol,
    );
    Ok(-outer + bulk + cross)
}

/// Settings of the energy-expansion sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionConfig {
    /// Magnitudes `|eps|`, ordered as given.
    pub eps: Vec<f64>,
    /// Multiples of `tau*` swept at each `eps`; the row with multiplier 1 feeds
    /// the residual and remainder fits.
    pub tau_multipliers: Vec<f64>,
    /// Shift exponent handed to every [`AnsatzSpec`].
    pub s: f64,
}

impl ExpansionConfig {
    /// Geometric grid `start * ratio^k`, `k < count`.
    pub fn geometric(start: f64, ratio: f64, count: usize) -> Self {
        Self {
            eps: (0..count).map(|k| start * ratio.powi(k as i32)).collect(),
            tau_multipliers: vec![0.5, 1.0, 2.0],
            s: DEFAULT_S,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionRow {
    pub eps: f64,
    pub tau_multiplier: f64,
    pub mu_bar: f64,
    pub mu: f64,
    pub j_quad: f64,
    pub c0_quad: f64,
    /// `(1/6) int_{R^6} U^3`, the bubble self-energy.
    pub c2: f64,
    /// `J(V) - c0 - c2`, computed without cancellation.
    pub excess: f64,
    pub e_pred: f64,
    pub residual_l32: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionReport {
    pub lambda0: f64,
    pub u0: f64,
    pub v0: f64,
    pub beta: i8,
    pub tau_star: f64,
    pub d1: f64,
    pub d2: f64,
    pub rows: Vec<ExpansionRow>,
    /// `excess ~ A eps mu^2 + B mu^3` over all rows.
    pub fit: LinearFit,
    pub predicted_eps_coefficient: f64,
    pub predicted_cubic_coefficient: f64,
    /// `|excess + E_pred|` against `mu` on the `tau*` rows.
    pub remainder: PowerFit,
    /// `|excess - A eps mu^2 - B mu^3|` with the fitted `A`, `B`.
    pub fitted_remainder: PowerFit,
    /// Residual `L^{3/2}` norm against `mu` on the `tau*` rows.
    pub residual: PowerFit,
}

impl ExpansionReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "eps,mu_bar,J_quad,c0_quad,E_pred,residual_L32")?;
        for r in &self.rows {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.eps, r.mu_bar, r.j_quad, r.c0_quad, r.e_pred, r.residual_l32
            )?;
        }
        Ok(())
    }

    pub fn summary(&self) -> Value {
        json!({
            "lambda0": self.lambda0,
            "u0": self.u0,
            "v0": self.v0,
            "beta": self.beta,
            "tau_star": self.tau_star,
            "d1": self.d1,
            "d2": self.d2,
            "fit": {
                "eps_mu2": {"value": self.fit.coef[0], "ci95": self.fit.ci95[0], "predicted": self.predicted_eps_coefficient},
                "mu3": {"value": self.fit.coef[1], "ci95": self.fit.ci95[1], "predicted": self.predicted_cubic_coefficient},
            },
            "remainder_exponent": self.remainder,
            "fitted_remainder_exponent": self.fitted_remainder,
            "residual_exponent": self.residual,
            "rows": self.rows.len(),
        })
    }
}

/// Centred case-1 selection for a radial base at the centre level.
fn centre_selection(base: &BranchPoint, aux: &AuxProfiles) -> Result<Selection> {
    let v0 = aux.v.at_origin();
    let candidate = Candidate {
        xi: [0.0; 6],
        sign: 1,
        u: base.profile.at_origin(),
        v: v0,
        kernel_slope: None,
        in_v_set: (v0 - 0.5).abs() <= crate::linear_aux::LEVEL_TOL,
        in_uv_set: true,
    };
    choose_bubbles(std::slice::from_ref(&candidate))
}

/// Base solution and profiles on a grid fine enough for a sweep.
#[derive(Debug, Clone)]
pub struct SweepSetup {
    pub base: BranchPoint,
    pub aux: AuxProfiles,
    pub tau_star: f64,
    /// First cell of the graded grid.
    pub first_cell: f64,
}

/// Cells per smallest bubble scale at the origin.
const CORE_CELLS: f64 = 500.0;
const PILOT_CELLS: usize = 1024;

/// Solves the ground state at `lambda0` on a uniform pilot grid to find `tau*`,
/// then again on an `n`-cell graded grid whose first cell is the smallest
/// bubble scale of `cfg` over [`CORE_CELLS`].
pub fn prepare_sweep(lambda0: f64, cfg: &ExpansionConfig, n: usize) -> Result<SweepSetup> {
    let pilot_grid = make_grid(6, PILOT_CELLS, Grading::Uniform)?.shared();
    let pilot = solve_bvp(&pilot_grid, lambda0, 1, DEFAULT_AMPLITUDES)?;
    let pilot_aux = solve_aux(&pilot)?;
    let tau = centre_selection(&pilot, &pilot_aux)?.bubbles[0].tau;
    let eps_min = cfg.eps.iter().map(|e| e.abs()).fold(f64::INFINITY, f64::min);
    let mult = cfg.tau_multipliers.iter().copied().fold(f64::INFINITY, f64::min);
    if !(eps_min > 0.0 && eps_min.is_finite() && mult > 0.0) {
        return Err(Error::Precondition("sweep needs nonzero eps and positive tau multipliers".into()));
    }
    let first_cell = eps_min * tau * mult / CORE_CELLS;
    let grid = make_grid(6, n, Grading::with_first_cell(n, first_cell)?)?.shared();
    let base = solve_bvp(&grid, lambda0, 1, DEFAULT_AMPLITUDES)?;
    let aux = solve_aux(&base)?;
    let tau_star = centre_selection(&base, &aux)?.bubbles[0].tau;
    Ok(SweepSetup { base, aux, tau_star, first_cell })
}

/// Newton refinement of the `tau*` ansatz at one `eps`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementRow {
    pub eps: f64,
    pub mu: f64,
    pub residual_l32: f64,
    pub distance_h1: f64,
    pub steps: usize,
    pub multiplier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementReport {
    pub rows: Vec<RefinementRow>,
    /// `|u* - V|_{H^1}` against `mu`.
    pub distance: PowerFit,
}

impl RefinementReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "eps,mu,residual_L32,distance_H1,steps")?;
        for r in &self.rows {
            writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e},{}", r.eps, r.mu, r.residual_l32, r.distance_h1, r.steps)?;
        }
        Ok(())
    }
}

/// Refines the centred ansatz at every `eps` of `cfg` (signs from the
/// selection rule, `tau = tau*`) and fits the distance decay.
pub fn refinement_check(base: &BranchPoint, aux: &AuxProfiles, cfg: &ExpansionConfig) -> Result<RefinementReport> {
    let sel = centre_selection(base, aux)?;
    let bubble = sel.bubbles[0];
    let rows: Vec<RefinementRow> = cfg
        .eps
        .par_iter()
        .map(|&mag| -> Result<RefinementRow> {
            let eps = sel.eps_sign as f64 * mag.abs();
            let spec = AnsatzSpec::new(base.clone(), aux.clone(), eps, vec![bubble], cfg.s)?;
            let v = assemble_ansatz(&spec)?;
            let out = refine_ansatz(&spec)?;
            Ok(RefinementRow {
                eps,
                mu: bubble.tau * mag.abs(),
                residual_l32: residual_norm(&v, spec.lambda())?,
                distance_h1: out.distance_h1,
                steps: out.updates.len(),
                multiplier: out.multiplier,
            })
        })
        .collect::<Result<_>>()?;
    let mus: Vec<f64> = rows.iter().map(|r| r.mu).collect();
    let d: Vec<f64> = rows.iter().map(|r| r.distance_h1).collect();
    Ok(RefinementReport { distance: power_law(&mus, &d, MIN_FIT_POINTS)?, rows })
}

/// Sweeps `eps` (and `tau` around `tau*`) for the centred one-bubble ansatz and
/// compares `J(V) - c0(eps)` with the expansion. `base` must sit on a grid that
/// resolves the smallest bubble.
pub fn expansion_check(base: &BranchPoint, aux: &AuxProfiles, cfg: &ExpansionConfig) -> Result<ExpansionReport> {
    if base.dim != 6 {
        return Err(Error::InvalidDimension(base.dim));
    }
    if cfg.eps.len() < MIN_FIT_POINTS {
        return Err(Error::TooFewPoints { need: MIN_FIT_POINTS, got: cfg.eps.len() });
    }
    if cfg.eps.iter().any(|e| !(e.abs() > 0.0)) || !cfg.tau_multipliers.contains(&1.0) {
        return Err(Error::Precondition("eps magnitudes must be nonzero and tau multipliers must include 1".into()));
    }
    let lambda0 = base.lambda;
    let u0 = base.profile.at_origin();
    let v0 = aux.v.at_origin();
    let sel = centre_selection(base, aux)?;
    let tau = sel.bubbles[0].tau;
    let beta = sel.bubbles[0].beta;
    let sign = sel.eps_sign as f64;
    let d1 = bubble::d1_closed();
    let d2v = d2(u0);
    let c2 = bubble::bubble_cubic_mass() / 6.0;

    let mut order: Vec<f64> = cfg.eps.iter().map(|e| e.abs()).collect();
    order.sort_by(f64::total_cmp);
    let mu_min = order[0] * tau * cfg.tau_multipliers.iter().copied().fold(f64::INFINITY, f64::min);
    check_resolution(&base.profile, mu_min)?;

    let jobs: Vec<(f64, f64)> = order.iter().flat_map(|&e| cfg.tau_multipliers.iter().map(move |&m| (e, m))).collect();
    let rows: Vec<ExpansionRow> = jobs
        .par_iter()
        .map(|&(mag, mult)| -> Result<ExpansionRow> {
            let eps = sign * mag;
            let lambda = lambda0 + eps;
            let mu = mult * tau * mag;
            let z = assemble_z(&base.profile, aux, eps)?;
            let c0 = energy(&z, lambda);
            let excess = bubble_excess(&z, lambda, mu, beta)?;
            let spec = AnsatzSpec::new(
                base.clone(),
                aux.clone(),
                eps,
                vec![BubbleSpec { xi0: [0.0; 6], beta, tau: mult * tau, construction: Construction::Fixed }],
                cfg.s,
            )?;
            let v = assemble_ansatz(&spec)?;
            Ok(ExpansionRow {
                eps,
                tau_multiplier: mult,
                mu_bar: mag,
                mu,
                j_quad: c0 + c2 + excess,
                c0_quad: c0,
                c2,
                excess,
                e_pred: expansion_e(lambda0, u0, v0, beta, mu, eps),
                residual_l32: residual_norm(&v, lambda)?,
            })
        })
        .collect::<Result<_>>()?;

    // rows scaled by mu^3 so every row carries comparable weight
    let design: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.eps / r.mu, 1.0]).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.excess / r.mu.powi(3)).collect();
    let fit = least_squares(&design, &y)?;
    let main: Vec<&ExpansionRow> = rows.iter().filter(|r| r.tau_multiplier == 1.0).collect();
    let mus: Vec<f64> = main.iter().map(|r| r.mu).collect();
    let rem: Vec<f64> = main.iter().map(|r| r.excess + r.e_pred).collect();
    let fitted: Vec<f64> =
        main.iter().map(|r| r.excess - fit.coef[0] * r.eps * r.mu * r.mu - fit.coef[1] * r.mu.powi(3)).collect();
    let res: Vec<f64> = main.iter().map(|r| r.residual_l32).collect();
    Ok(ExpansionReport {
        lambda0,
        u0,
        v0,
        beta,
        tau_star: tau,
        d1,
        d2: d2v,
        predicted_eps_coefficient: -d1 * (0.5 + beta as f64 * v0),
        predicted_cubic_coefficient: -11.0 / 9.0 * d2v,
        remainder: power_law(&mus, &rem, MIN_FIT_POINTS)?,
        fitted_remainder: power_law(&mus, &fitted, MIN_FIT_POINTS)?,
        residual: power_law(&mus, &res, MIN_FIT_POINTS)?,
        fit,
        rows,
    })
}
