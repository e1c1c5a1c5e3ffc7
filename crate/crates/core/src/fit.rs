//! Small least-squares fits used by the sweep diagnostics.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// Ordinary least squares `y ~ X c`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearFit {
    pub coef: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Half-widths of two-sided 95% intervals (Student t).
    pub ci95: Vec<f64>,
    pub rss: f64,
    pub dof: usize,
}

/// Two-sided 97.5% Student-t quantile.
pub fn t_quantile(dof: usize) -> f64 {
    const TABLE: [f64; 30] = [
        12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160, 2.145, 2.131,
        2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
    ];
    match dof {
        0 => f64::INFINITY,
        d if d <= 30 => TABLE[d - 1],
        _ => 1.96,
    }
}

pub fn least_squares(rows: &[Vec<f64>], y: &[f64]) -> Result<LinearFit> {
    let k = rows.first().map_or(0, Vec::len);
    if rows.len() <= k || k == 0 {
        return Err(Error::TooFewPoints { need: k + 1, got: rows.len() });
    }
    if rows.len() != y.len() || rows.iter().any(|r| r.len() != k) {
        return Err(Error::Precondition("design matrix and data disagree in shape".into()));
    }
    let x = DMatrix::from_fn(rows.len(), k, |i, j| rows[i][j]);
    let yv = DVector::from_column_slice(y);
    let svd = x.clone().svd(true, true);
    let coef = svd.solve(&yv, 1e-14).map_err(|e| Error::Precondition(e.to_string()))?;
    let resid = &yv - &x * &coef;
    let rss = resid.norm_squared();
    let dof = rows.len() - k;
    let sigma2 = rss / dof as f64;
    let xtx = x.transpose() * &x;
    let inv = xtx.try_inverse().ok_or_else(|| Error::Precondition("rank-deficient design matrix".into()))?;
    let stderr: Vec<f64> = (0..k).map(|j| (sigma2 * inv[(j, j)]).max(0.0).sqrt()).collect();
    let t = t_quantile(dof);
    Ok(LinearFit {
        coef: coef.iter().copied().collect(),
        ci95: stderr.iter().map(|s| t * s).collect(),
        stderr,
        rss,
        dof,
    })
}

/// `|y| ~ C x^p` fitted on logarithms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerFit {
    pub exponent: f64,
    pub exponent_ci95: f64,
    pub prefactor: f64,
    pub points: usize,
}

pub fn power_law(x: &[f64], y: &[f64], min_points: usize) -> Result<PowerFit> {
    if x.len() < min_points.max(3) {
        return Err(Error::TooFewPoints { need: min_points.max(3), got: x.len() });
    }
    if x.iter().chain(y).any(|v| *v == 0.0 || !v.is_finite()) || x.iter().any(|&v| v < 0.0) {
        return Err(Error::Precondition("power fit needs positive abscissae and nonzero data".into()));
    }
    let rows: Vec<Vec<f64>> = x.iter().map(|v| vec![1.0, v.ln()]).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
    let f = least_squares(&rows, &ly)?;
    Ok(PowerFit { exponent: f.coef[1], exponent_ci95: f.ci95[1], prefactor: f.coef[0].exp(), points: x.len() })
}
