//! One function per subcommand. Each returns a JSON summary and the tables
//! that go with it; `main` decides how they are written.

use std::sync::Arc;

use bn6::continuation::{
    default_max_amplitude, default_window, extract_limit, radial_eigenvalue, trace_branch_in, Branch,
};
use bn6::linear_aux::{centre_value, essential_nondegeneracy, sector_spectrum, solve_aux, solve_v};
use bn6::nonlinear_radial::{find_lambda0, solve_bvp, BranchPoint, DEFAULT_AMPLITUDES};
use bn6::radial_core::make_grid;
use bn6::reduction::{expansion_check, prepare_sweep, refinement_check, ExpansionConfig};
use bn6::{bubble, Grading, RadialFn, RadialGrid};
use serde_json::{json, Value};

use crate::config::{ConfigError, RunConfig};

#[derive(Debug)]
pub enum Failure {
    Config(ConfigError),
    Solver(bn6::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<bn6::Error> for Failure {
    fn from(e: bn6::Error) -> Self {
        Failure::Solver(e)
    }
}

pub type Outcome = Result<Output, Failure>;

/// A named table with a fixed header.
pub struct Table {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    fn profile(name: &str, f: &RadialFn) -> Self {
        let rows = f
            .grid()
            .nodes()
            .iter()
            .zip(f.values())
            .zip(f.derivatives())
            .map(|((r, v), d)| vec![json!(r), json!(v), json!(d)])
            .collect();
        Self { name: name.into(), header: vec!["r", "value", "derivative"], rows }
    }

    fn branch(b: &Branch) -> Self {
        let rows = b.points.iter().map(|p| vec![json!(p.amplitude), json!(p.lambda), json!(p.residual)]).collect();
        Self { name: "branch".into(), header: vec!["amplitude", "lambda", "residual"], rows }
    }
}

pub struct Output {
    pub name: &'static str,
    pub summary: Value,
    pub tables: Vec<Table>,
}

fn uniform(cfg: &RunConfig, dim: usize) -> Result<Arc<RadialGrid>, Failure> {
    Ok(make_grid(dim, cfg.usize("grid_n")?, Grading::Uniform)?.shared())
}

fn require_six(dim: usize, what: &str) -> Result<(), Failure> {
    if dim == 6 {
        Ok(())
    } else {
        Err(ConfigError::BadValue { key: "N".into(), reason: format!("{what} is defined for N = 6 only") }.into())
    }
}

/// `lambda` from the config, solving for `lambda_0` when asked to.
fn resolve_lambda(cfg: &RunConfig, dim: usize) -> Result<(f64, Option<Value>), Failure> {
    if cfg.get("lambda") == "lambda0" {
        require_six(dim, "lambda = lambda0")?;
        let cert = find_lambda0(&uniform(cfg, 6)?, cfg.pair("bracket")?)?;
        Ok((cert.lambda0, Some(cert.summary())))
    } else {
        Ok((cfg.f64("lambda")?, None))
    }
}

fn base_at(cfg: &RunConfig, dim: usize, lambda: f64) -> Result<BranchPoint, Failure> {
    let m = cfg.usize("m")?;
    Ok(solve_bvp(&uniform(cfg, dim)?, lambda, m, DEFAULT_AMPLITUDES)?)
}

pub fn constants(_: &RunConfig) -> Outcome {
    Ok(Output { name: "constants", summary: bubble::constants().summary(), tables: vec![] })
}

pub fn lambda0(cfg: &RunConfig) -> Outcome {
    require_six(cfg.dim()?, "lambda0")?;
    let cert = find_lambda0(&uniform(cfg, 6)?, cfg.pair("bracket")?)?;
    let table = Table::profile("ground_profile", &cert.ground.profile);
    Ok(Output { name: "lambda0", summary: cert.summary(), tables: vec![table] })
}

pub fn ground_state(cfg: &RunConfig) -> Outcome {
    let dim = cfg.dim()?;
    let (lambda, _) = resolve_lambda(cfg, dim)?;
    let p = base_at(cfg, dim, lambda)?;
    let mut summary = p.summary();
    summary["ode_residual"] = json!(p.ode_residual());
    summary["energy"] = json!(bn6::reduction::energy(&p.profile, lambda));
    Ok(Output { name: "ground_state", summary, tables: vec![Table::profile("profile", &p.profile)] })
}

pub fn aux_solve(cfg: &RunConfig) -> Outcome {
    let dim = cfg.dim()?;
    let (lambda, _) = resolve_lambda(cfg, dim)?;
    let base = base_at(cfg, dim, lambda)?;
    if dim != 6 {
        let v = solve_v(&base)?;
        let summary = json!({"base": base.summary(), "v0": v.at_origin()});
        return Ok(Output { name: "aux", summary, tables: vec![Table::profile("v", &v)] });
    }
    let aux = solve_aux(&base)?;
    let summary = json!({
        "base": base.summary(),
        "v0": aux.v.at_origin(),
        "w0": aux.w.at_origin(),
        "v_residual": aux.v_residual,
        "w_residual": aux.w_residual,
    });
    Ok(Output { name: "aux", summary, tables: vec![Table::profile("v", &aux.v), Table::profile("w", &aux.w)] })
}

pub fn nondeg(cfg: &RunConfig) -> Outcome {
    let dim = cfg.dim()?;
    require_six(dim, "nondeg")?;
    let (lambda, cert) = resolve_lambda(cfg, dim)?;
    let base = base_at(cfg, dim, lambda)?;
    let aux = solve_aux(&base)?;
    let spectrum = sector_spectrum(&base, cfg.usize("lmax")?)?;
    let essential = essential_nondegeneracy(&base, &aux.v);
    let centre = centre_value(lambda, cfg.usize("grid_n")?)?;
    let summary = json!({
        "lambda": lambda,
        "lambda0_certificate": cert,
        "spectrum": spectrum.summary(),
        "essential": essential.summary(),
        "two_v0_minus_one": {
            "value": centre.value,
            "error": centre.error,
            "straddles_zero": centre.straddles_zero(),
            "cells": centre.cells,
            "shooting": centre.shooting,
            "finite_volume": centre.finite_volume,
            "extrapolated": centre.extrapolated,
        },
    });
    Ok(Output { name: "nondeg", summary, tables: vec![Table::profile("v", &aux.v), Table::profile("w", &aux.w)] })
}

fn sweep_config(cfg: &RunConfig) -> Result<ExpansionConfig, Failure> {
    let (start, ratio, count) = cfg.eps_grid()?;
    let mut sweep = ExpansionConfig::geometric(start.abs(), ratio, count);
    sweep.tau_multipliers = cfg.list("tau_multipliers")?;
    sweep.s = cfg.f64("s")?;
    Ok(sweep)
}

pub fn ansatz_check(cfg: &RunConfig) -> Outcome {
    require_six(cfg.dim()?, "ansatz-check")?;
    let (lambda0, cert) = resolve_lambda(cfg, 6)?;
    let sweep = sweep_config(cfg)?;
    let setup = prepare_sweep(lambda0, &sweep, cfg.usize("sweep_grid_n")?)?;
    let report = refinement_check(&setup.base, &setup.aux, &sweep)?;
    let residuals: Vec<f64> = report.rows.iter().map(|r| r.residual_l32).collect();
    let mus: Vec<f64> = report.rows.iter().map(|r| r.mu).collect();
    let residual_fit = bn6::fit::power_law(&mus, &residuals, bn6::reduction::MIN_FIT_POINTS)?;
    let rows = report
        .rows
        .iter()
        .map(|r| vec![json!(r.eps), json!(r.mu), json!(r.residual_l32), json!(r.distance_h1), json!(r.steps)])
        .collect();
    let summary = json!({
        "lambda0": lambda0,
        "lambda0_certificate": cert,
        "tau_star": setup.tau_star,
        "first_cell": setup.first_cell,
        "residual_exponent": residual_fit,
        "distance_exponent": report.distance,
    });
    let table =
        Table { name: "ansatz".into(), header: vec!["eps", "mu", "residual_L32", "distance_H1", "steps"], rows };
    Ok(Output { name: "ansatz_check", summary, tables: vec![table] })
}

pub fn expansion(cfg: &RunConfig) -> Outcome {
    require_six(cfg.dim()?, "expansion-check")?;
    let (lambda0, _) = resolve_lambda(cfg, 6)?;
    let sweep = sweep_config(cfg)?;
    let setup = prepare_sweep(lambda0, &sweep, cfg.usize("sweep_grid_n")?)?;
    let report = expansion_check(&setup.base, &setup.aux, &sweep)?;
    let rows = report
        .rows
        .iter()
        .map(|r| {
            vec![
                json!(r.eps),
                json!(r.mu_bar),
                json!(r.j_quad),
                json!(r.c0_quad),
                json!(r.e_pred),
                json!(r.residual_l32),
            ]
        })
        .collect();
    let table = Table {
        name: "expansion".into(),
        header: vec!["eps", "mu_bar", "J_quad", "c0_quad", "E_pred", "residual_L32"],
        rows,
    };
    Ok(Output { name: "expansion_check", summary: report.summary(), tables: vec![table] })
}

fn branch_from(cfg: &RunConfig) -> Result<Branch, Failure> {
    let dim = cfg.dim()?;
    let m = cfg.usize("m")?;
    let a_start = cfg.f64("a_start")?;
    let a_end = cfg.auto_f64("a_end")?.unwrap_or_else(|| default_max_amplitude(dim));
    let points = match cfg.auto_usize("points")? {
        Some(p) => p,
        None if a_end > a_start && a_start > 0.0 => (a_end / a_start).log2().ceil() as usize + 1,
        None => 2,
    };
    let schedule = bn6::continuation::schedule(a_start, a_end, points)?;
    Ok(trace_branch_in(dim, m, &schedule, default_window(dim, m)?)?)
}

fn branch_json(b: &Branch) -> Value {
    json!({"N": b.dim, "m": b.m, "window": [b.window.0, b.window.1], "points": b.points.len(), "diagnostics": b.diagnostics})
}

pub fn branch(cfg: &RunConfig) -> Outcome {
    let b = branch_from(cfg)?;
    Ok(Output { name: "branch", summary: branch_json(&b), tables: vec![Table::branch(&b)] })
}

pub fn limits(cfg: &RunConfig) -> Outcome {
    let b = branch_from(cfg)?;
    let est = extract_limit(&b, Some(cfg.usize("tail")?))?;
    let mut eigen = Vec::new();
    for k in 0..b.m {
        eigen.push(radial_eigenvalue(b.dim, k)?);
    }
    let summary = json!({"branch": branch_json(&b), "limit": est.summary(), "radial_eigenvalues": eigen});
    Ok(Output { name: "limits", summary, tables: vec![Table::branch(&b)] })
}
