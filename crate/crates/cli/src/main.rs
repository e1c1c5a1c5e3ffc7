//! `bn6`: batch front-end writing reproducible CSV/JSON artifacts.

mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use commands::{Failure, Output};
use config::{ConfigError, RunConfig};

const VERSION: &str = concat!("bn6 ", env!("CARGO_PKG_VERSION"));

#[derive(Parser, Debug)]
#[command(name = "bn6", version, about = "Radial Brezis-Nirenberg verification runs", disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat `key = value` file; flags below override it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long = "N", global = true)]
    dim: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    lambda: Option<String>,
    #[arg(long, global = true)]
    m: Option<String>,
    #[arg(long = "grid-n", global = true)]
    grid_n: Option<String>,
    /// Output directory (default `$BN6_OUT`, else the working directory).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<String>,
    /// `csv` or `json`.
    #[arg(long, global = true)]
    format: Option<String>,
    /// `start:ratio:count`.
    #[arg(long = "eps-grid", global = true, allow_hyphen_values = true)]
    eps_grid: Option<String>,
    #[arg(long, global = true)]
    s: Option<String>,
    #[arg(long, global = true)]
    lmax: Option<String>,
    /// Any other config key, as `key=value`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Radial solution with `m` nodal regions at fixed lambda.
    GroundState,
    /// Trace lambda(a) over an amplitude schedule.
    Branch,
    /// Solve 2 u(0) = lambda along the ground states (N = 6).
    Lambda0,
    /// Auxiliary profiles v and w.
    AuxSolve,
    /// Sector spectra and the essential non-degeneracy report.
    Nondeg,
    /// Ansatz residuals and Newton refinement over an eps grid.
    AnsatzCheck,
    /// Energy of the ansatz against the reduced expansion.
    ExpansionCheck,
    /// Branch plus extrapolated limit.
    Limits,
    /// Bubble constants.
    Constants,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::GroundState => "ground-state",
            Command::Branch => "branch",
            Command::Lambda0 => "lambda0",
            Command::AuxSolve => "aux-solve",
            Command::Nondeg => "nondeg",
            Command::AnsatzCheck => "ansatz-check",
            Command::ExpansionCheck => "expansion-check",
            Command::Limits => "limits",
            Command::Constants => "constants",
        }
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Unreadable { path: path.display().to_string(), reason: e.to_string() })?;
        cfg.apply_text(&text)?;
    }
    let flags = [
        ("N", &cli.dim),
        ("lambda", &cli.lambda),
        ("m", &cli.m),
        ("grid_n", &cli.grid_n),
        ("out", &cli.out),
        ("format", &cli.format),
        ("eps_grid", &cli.eps_grid),
        ("s", &cli.s),
        ("lmax", &cli.lmax),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.set(k, v)?;
        }
    }
    for kv in &cli.set {
        let (k, v) = kv.split_once('=').ok_or(ConfigError::Syntax { line: 0, text: kv.clone() })?;
        cfg.set(k, v)?;
    }
    cfg.is_json()?;
    Ok(cfg)
}

fn provenance(cmd: Command, cfg: &RunConfig) -> Value {
    json!({"version": VERSION, "command": cmd.name(), "config": cfg.entries()})
}

fn csv_text(cmd: Command, cfg: &RunConfig, t: &commands::Table) -> String {
    let mut s = format!("# {VERSION} {}\n", cmd.name());
    for (k, v) in cfg.entries() {
        s.push_str(&format!("# {k} = {v}\n"));
    }
    s.push_str(&t.header.join(","));
    s.push('\n');
    for row in &t.rows {
        let cells: Vec<String> = row
            .iter()
            .map(|c| match c.as_f64() {
                Some(x) if !(c.is_i64() || c.is_u64()) => io::num(x),
                _ => c.to_string(),
            })
            .collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

fn render(cmd: Command, cfg: &RunConfig, out: Output) -> io::Artifacts {
    let mut art = io::Artifacts::default();
    let mut doc = json!({"provenance": provenance(cmd, cfg), "result": out.summary});
    if cfg.is_json().unwrap_or(true) {
        for t in &out.tables {
            doc["tables"][&t.name] = json!({"columns": t.header, "rows": t.rows});
        }
    } else {
        for t in &out.tables {
            art.add(&format!("{}_{}.csv", out.name, t.name), csv_text(cmd, cfg, t).into_bytes());
        }
    }
    art.add(&format!("{}.json", out.name), io::to_json(&doc).into_bytes());
    art
}

fn run(cmd: Command, cfg: &RunConfig) -> Result<Output, Failure> {
    match cmd {
        Command::GroundState => commands::ground_state(cfg),
        Command::Branch => commands::branch(cfg),
        Command::Lambda0 => commands::lambda0(cfg),
        Command::AuxSolve => commands::aux_solve(cfg),
        Command::Nondeg => commands::nondeg(cfg),
        Command::AnsatzCheck => commands::ansatz_check(cfg),
        Command::ExpansionCheck => commands::expansion(cfg),
        Command::Limits => commands::limits(cfg),
        Command::Constants => commands::constants(cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("bn6: config error: {e}");
            return ExitCode::from(3);
        }
    };
    let out = match run(cli.command, &cfg) {
        Ok(o) => o,
        Err(Failure::Config(e)) => {
            eprintln!("bn6: config error: {e}");
            return ExitCode::from(3);
        }
        Err(Failure::Solver(e)) => {
            eprintln!("bn6: {} failed: {e}", cli.command.name());
            return ExitCode::from(2);
        }
    };
    match render(cli.command, &cfg, out).commit(std::path::Path::new(cfg.get("out"))) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("bn6: cannot write artifacts: {e}");
            ExitCode::from(2)
        }
    }
}
