//! Radial solution branches parametrised by the amplitude `a = u(0)`, and
//! extrapolation of `lambda(a)` as `a -> infinity`.

use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::fit::least_squares;
use crate::nonlinear_radial::{match_lambda, shoot_end};
use crate::radial_core::{make_grid, shooting_eigenvalue, Grading, OperatorSpec};

/// Points of the `lambda` scan at each amplitude.
pub const LAMBDA_SAMPLES: usize = 48;
/// Tail points required by [`extract_limit`].
pub const MIN_TAIL: usize = 8;
const BOOTSTRAP: usize = 400;
const SEED: u64 = 0x6b6e_6f64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchSample {
    pub amplitude: f64,
    pub lambda: f64,
    /// `|u(1)|` of the matched shot.
    pub residual: f64,
    pub zeros: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Branch {
    pub dim: usize,
    pub m: usize,
    pub window: (f64, f64),
    pub points: Vec<BranchSample>,
    /// Why the branch stopped early, if it did.
    pub diagnostics: Vec<String>,
}

impl Branch {
    pub fn amplitudes(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.amplitude).collect()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.lambda).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "amplitude,lambda,residual")?;
        for p in &self.points {
            writeln!(out, "{:.16e},{:.16e},{:.16e}", p.amplitude, p.lambda, p.residual)?;
        }
        Ok(())
    }
}

/// `k`-th radial Dirichlet eigenvalue of `-Delta` on the unit ball (`k = 0` is `lambda_1`).
pub fn radial_eigenvalue(dim: usize, k: usize) -> Result<f64> {
    let grid = Arc::new(make_grid(dim, 16, Grading::Uniform)?);
    shooting_eigenvalue(&OperatorSpec::free(grid, 0, 0.0)?, k)
}

/// Default `lambda` window for `m` nodal regions: `(0, lambda_m]` slightly widened.
pub fn default_window(dim: usize, m: usize) -> Result<(f64, f64)> {
    if m == 0 {
        return Err(Error::Precondition("nodal count starts at 1".into()));
    }
    Ok((1e-3, 1.001 * radial_eigenvalue(dim, m - 1)?))
}

/// Geometric amplitude schedule from `a_start` to `a_end`.
pub fn schedule(a_start: f64, a_end: f64, points: usize) -> Result<Vec<f64>> {
    if !(a_start > 0.0 && a_end > a_start && points >= 2) {
        return Err(Error::Precondition(format!("amplitude schedule [{a_start}, {a_end}] x {points} invalid")));
    }
    let q = (a_end / a_start).ln() / (points - 1) as f64;
    Ok((0..points).map(|k| a_start * (q * k as f64).exp()).collect())
}

/// Largest amplitude `2^k` used by default in dimension `dim`. The `lambda`
/// information sits in a part of the profile that is `a^{-2/(N-2)}` smaller
/// than the peak, so shooting loses it to rounding near `5e7` for `N = 4` and
/// `1e11` for `N = 5, 6`. For `N = 4` the ratio of successive increments of
/// `lambda` already drifts at `2^23`, hence the lower cap.
pub fn default_max_amplitude(dim: usize) -> f64 {
    match dim {
        3 => 1e4,
        4 => 2f64.powi(22),
        _ => 2f64.powi(33),
    }
}

/// Default ratio-2 schedule from `1` to [`default_max_amplitude`].
pub fn default_schedule(dim: usize) -> Vec<f64> {
    let end = default_max_amplitude(dim);
    let n = end.log2().ceil() as usize;
    let q = end.ln() / n as f64;
    (0..=n).map(|k| (q * k as f64).exp()).collect()
}

/// Traces the `m`-nodal branch over a geometric amplitude schedule. Points are
/// independent solves; the branch is cut at the first amplitude whose match
/// fails, which is recorded in `diagnostics`.
pub fn trace_branch(dim: usize, m: usize, a_start: f64, a_end: f64, points: usize) -> Result<Branch> {
    let window = default_window(dim, m)?;
    trace_branch_in(dim, m, &schedule(a_start, a_end, points)?, window)
}

pub fn trace_branch_in(dim: usize, m: usize, amplitudes: &[f64], window: (f64, f64)) -> Result<Branch> {
    let solved: Vec<Result<BranchSample>> = amplitudes
        .par_iter()
        .map(|&a| {
            let lambda = match_lambda(dim, a, m, window, LAMBDA_SAMPLES)?;
            let end = shoot_end(dim, lambda, a)?;
            Ok(BranchSample { amplitude: a, lambda, residual: end.boundary.abs(), zeros: end.zeros })
        })
        .collect();
    let mut points = Vec::new();
    let mut diagnostics = Vec::new();
    for (a, r) in amplitudes.iter().zip(solved) {
        match r {
            Ok(p) => points.push(p),
            Err(e) => {
                if points.is_empty() {
                    return Err(e);
                }
                diagnostics.push(format!("stopped at amplitude {a:e}: {e}"));
                break;
            }
        }
    }
    Ok(Branch { dim, m, window, points, diagnostics })
}

/// Extrapolated `lambda_inf` of a branch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitEstimate {
    pub lambda_inf: f64,
    pub model: String,
    pub gamma: f64,
    pub coefficient: f64,
    /// Bootstrap spread combined with twice [`LimitEstimate::window_shift`].
    pub uncertainty: f64,
    /// Bootstrap standard deviation of `lambda_inf`, floored at the model misfit.
    pub statistical: f64,
    /// Change of `lambda_inf` when the fit window gains its next-earlier point
    /// (loses its earliest one when the branch has no spare point).
    pub window_shift: f64,
    /// Tail data `(a, lambda)` used by the fit.
    pub tail: Vec<(f64, f64)>,
    /// `lambda` increasing (+1), decreasing (-1) or neither (0) along the tail.
    pub trend: i8,
    /// Set when the fit is suspect; not fatal.
    pub flag: Option<String>,
}

impl LimitEstimate {
    pub fn summary(&self) -> Value {
        json!({
            "lambda_inf": self.lambda_inf,
            "model": self.model,
            "gamma": self.gamma,
            "coefficient": self.coefficient,
            "uncertainty": self.uncertainty,
            "statistical": self.statistical,
            "window_shift": self.window_shift,
            "trend": self.trend,
            "flag": self.flag,
            "tail": self.tail,
        })
    }
}

/// Tail models `lambda_inf + C g(a)^-gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TailModel {
    /// `g(a) = a`.
    Power,
    /// `g(a) = ln a`, for logarithmically slow tails.
    InverseLog,
}

impl TailModel {
    fn basis(self, a: f64, gamma: f64) -> f64 {
        match self {
            TailModel::Power => a.powf(-gamma),
            TailModel::InverseLog => a.ln().powf(-gamma),
        }
    }

    fn label(self) -> &'static str {
        match self {
            TailModel::Power => "lambda_inf + C a^-gamma",
            TailModel::InverseLog => "lambda_inf + C (ln a)^-gamma",
        }
    }
}

/// Least-squares fit at fixed `gamma`; returns `(lambda_inf, C, rss)`.
fn fit_fixed_gamma(model: TailModel, a: &[f64], l: &[f64], gamma: f64) -> Result<(f64, f64, f64)> {
    let rows: Vec<Vec<f64>> = a.iter().map(|&x| vec![1.0, model.basis(x, gamma)]).collect();
    let f = least_squares(&rows, l)?;
    Ok((f.coef[0], f.coef[1], f.rss))
}

/// Chooses `gamma` in `[0.05, 6]` by a log scan followed by golden section on
/// the residual sum of squares. Returns `(lambda_inf, C, gamma, rss)`.
fn fit_tail(model: TailModel, a: &[f64], l: &[f64]) -> Result<(f64, f64, f64, f64)> {
    let rss = |g: f64| fit_fixed_gamma(model, a, l, g).map(|r| r.2).unwrap_or(f64::INFINITY);
    let gs: Vec<f64> = (0..60).map(|k| 0.05 * (120f64).powf(k as f64 / 59.0)).collect();
    let k = (0..gs.len()).min_by(|&i, &j| rss(gs[i]).total_cmp(&rss(gs[j]))).expect("non-empty");
    let (mut lo, mut hi) = (gs[k.saturating_sub(1)], gs[(k + 1).min(gs.len() - 1)]);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let x1 = hi - phi * (hi - lo);
        let x2 = lo + phi * (hi - lo);
        if rss(x1) < rss(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    let gamma = 0.5 * (lo + hi);
    let (li, c, r) = fit_fixed_gamma(model, a, l, gamma)?;
    Ok((li, c, gamma, r))
}

/// Both models have three parameters, so the smaller residual wins.
fn best_fit(a: &[f64], l: &[f64]) -> Result<(TailModel, (f64, f64, f64, f64))> {
    let power = fit_tail(TailModel::Power, a, l)?;
    if a.iter().all(|&x| x > 1.0) {
        let log = fit_tail(TailModel::InverseLog, a, l)?;
        if log.3 < power.3 {
            return Ok((TailModel::InverseLog, log));
        }
    }
    Ok((TailModel::Power, power))
}

/// Fits the last `tail` points (all points when `tail` is `None`) with the
/// better of the [`TailModel`]s. The uncertainty combines a seeded residual
/// bootstrap that refits with the chosen model and the sensitivity to the
/// fit window.
pub fn extract_limit(b: &Branch, tail: Option<usize>) -> Result<LimitEstimate> {
    let k = tail.unwrap_or(b.points.len()).min(b.points.len());
    if k < MIN_TAIL {
        return Err(Error::TooFewPoints { need: MIN_TAIL, got: k });
    }
    let pts = &b.points[b.points.len() - k..];
    let a: Vec<f64> = pts.iter().map(|p| p.amplitude).collect();
    let l: Vec<f64> = pts.iter().map(|p| p.lambda).collect();
    let (model, (lambda_inf, coefficient, gamma, rss)) = best_fit(&a, &l)?;
    let fitted: Vec<f64> = a.iter().map(|&x| lambda_inf + coefficient * model.basis(x, gamma)).collect();
    let resid: Vec<f64> = l.iter().zip(&fitted).map(|(y, f)| y - f).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ ((b.dim as u64) << 8) ^ b.m as u64);
    let draws: Vec<Vec<usize>> = (0..BOOTSTRAP).map(|_| (0..k).map(|_| rng.random_range(0..k)).collect()).collect();
    let boot: Vec<f64> = draws
        .par_iter()
        .filter_map(|idx| {
            let y: Vec<f64> = fitted.iter().zip(idx).map(|(f, &i)| f + resid[i]).collect();
            fit_tail(model, &a, &y).ok().map(|r| r.0)
        })
        .collect();
    let mean = boot.iter().sum::<f64>() / boot.len().max(1) as f64;
    let var = boot.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (boot.len().max(2) - 1) as f64;
    // the bootstrap cannot see a perfect fit, so keep a floor at the model misfit
    let statistical = var.sqrt().max((rss / k as f64).sqrt());
    // the bootstrap is also blind to the neglected higher-order tail terms
    let wider = if b.points.len() > k { &b.points[b.points.len() - k - 1..] } else { &pts[1..] };
    let wa: Vec<f64> = wider.iter().map(|p| p.amplitude).collect();
    let wl: Vec<f64> = wider.iter().map(|p| p.lambda).collect();
    let window_shift = fit_tail(model, &wa, &wl).map_or(f64::INFINITY, |r| (r.0 - lambda_inf).abs());
    let uncertainty = statistical.hypot(2.0 * window_shift);

    let diffs: Vec<f64> = l.windows(2).map(|w| w[1] - w[0]).collect();
    let trend = if diffs.iter().all(|d| *d > 0.0) {
        1
    } else if diffs.iter().all(|d| *d < 0.0) {
        -1
    } else {
        0
    };
    let alternating = diffs.windows(2).all(|w| w[0] * w[1] < 0.0);
    let mut flag = None;
    if trend == 0 && !alternating {
        flag = Some("tail neither monotone nor alternating".to_string());
    } else if !uncertainty.is_finite() || !(gamma > 0.06 && gamma < 5.9) {
        flag = Some(format!("decay exponent {gamma:.3} at the edge of the search range"));
    }
    Ok(LimitEstimate {
        lambda_inf,
        model: model.label().into(),
        gamma,
        coefficient,
        uncertainty,
        statistical,
        window_shift,
        tail: a.into_iter().zip(l).collect(),
        trend,
        flag,
    })
}
