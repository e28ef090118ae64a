//! Batch front end: `evolve`, `sweep`, `fixed-point` and `selfcheck`.
//!
//! Data commands write a CSV to `--out` plus a `<out>.meta.json` sidecar
//! holding everything that may differ between otherwise identical runs
//! (wall time, worker count). The CSV itself is deterministic.

mod config;
mod selfcheck;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

pub use config::{
    resolve, AtomSpec, ConfigFile, FieldCutoff, GridShape, Overrides, RunConfig, KNOWN_KEYS,
};
pub use selfcheck::{report as selfcheck_report, run_checks, CheckOutcome, Fixtures};

use crate::dynamics::{trajectory, uniform_grid, TrajectoryOptions, TrajectoryRecord};
use crate::entanglement::EMeasure;
use crate::entropy::{exchange_parameter, r_parameter, EntropySeries};
use crate::states::{auto_truncate, product_state, thermal_field, FieldDistribution};
use crate::sweep::{
    fixed_point, fixed_point_populations, run_sweep, CellIssue, Diagnostics, SweepCell,
    SweepConfig, SweepGrid,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SELFCHECK: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Tolerance used by `--n-f auto`.
pub const AUTO_TRUNCATION_TOL: f64 = 1e-14;

pub const EVOLVE_HEADER: &str =
    "lambda_t,S_a,S_f,S_af,dS_a,dS_f,dS_sum,purity_a,purity_f,N_expect,lambda_m,n_neg_sig";
pub const SWEEP_HEADER: &str = "theta,r,P,R_bar,E,n_neg_sig,status";

const EVOLVE_TRACE_TOL: f64 = 1e-10;
const EVOLVE_UNITARITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        match e {
            crate::Error::InvalidParameter { name, reason } => {
                CliError::Config(format!("{name}: {reason}"))
            }
            other => CliError::Numerical(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "jcm",
    version,
    about = "Resonant Jaynes-Cummings entropy and entanglement simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evolve one initial state and write the entropy trajectory.
    Evolve(EvolveArgs),
    /// Sweep initial atomic states over the Bloch ball.
    Sweep(SweepArgs),
    /// Print the stationary atomic state for a thermal field.
    FixedPoint(FixedPointArgs),
    /// Run the built-in invariant checks.
    Selfcheck,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Flat `key = value` file; flags take precedence over its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Mean thermal photon number.
    #[arg(long)]
    n_bar: Option<f64>,
    /// Highest explicit Fock level, or `auto`.
    #[arg(long)]
    n_f: Option<FieldCutoff>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Denominator guard for the exchange parameter and mutual ratio.
    #[arg(long)]
    eps: Option<f64>,
    /// Negative partial-transpose eigenvalues smaller than this are artifacts.
    #[arg(long)]
    artifact_threshold: Option<f64>,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvolveArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// `ground`, `excited` or `r=..,theta=..,phi=..`.
    #[arg(long, allow_hyphen_values = true)]
    atom: Option<AtomSpec>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Resolution as THETAxR.
    #[arg(long)]
    grid: Option<GridShape>,
    /// Comma-separated subset of exchange,mutual,ppt.
    #[arg(long)]
    diagnostics: Option<Diagnostics>,
}

#[derive(Debug, Args)]
struct FixedPointArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n_bar: Option<f64>,
    /// Also write the JSON to this path.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            n_bar: self.n_bar,
            n_f: self.n_f,
            t_max: self.t_max,
            dt: self.dt,
            eps: self.eps,
            artifact_threshold: self.artifact_threshold,
            workers: self.workers,
            out: self.out.clone(),
            ..Overrides::default()
        }
    }
}

fn load_config(path: Option<&Path>, flags: Overrides) -> Result<RunConfig, CliError> {
    let file = match path {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    resolve(&file, flags)
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return if code == 0 { EXIT_OK } else { EXIT_CONFIG };
        }
    };
    let result = match cli.command {
        Command::Evolve(a) => {
            let mut flags = a.common.overrides();
            flags.atom = a.atom;
            load_config(a.common.config.as_deref(), flags).and_then(|cfg| cmd_evolve(&cfg, out))
        }
        Command::Sweep(a) => {
            let mut flags = a.common.overrides();
            flags.grid = a.grid;
            flags.diagnostics = a.diagnostics;
            load_config(a.common.config.as_deref(), flags).and_then(|cfg| cmd_sweep(&cfg, out))
        }
        Command::FixedPoint(a) => {
            let flags = Overrides {
                n_bar: a.n_bar,
                out: a.out,
                ..Overrides::default()
            };
            load_config(a.config.as_deref(), flags).and_then(|cfg| cmd_fixed_point(&cfg, out))
        }
        Command::Selfcheck => return selfcheck_with(&Fixtures::default(), out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

/// Runs the invariant suite on `fixtures`, printing the report to `out`.
pub fn selfcheck_with(fixtures: &Fixtures, out: &mut dyn Write) -> i32 {
    let outcomes = run_checks(fixtures);
    match selfcheck_report(&outcomes, out) {
        Ok(true) => EXIT_OK,
        _ => EXIT_SELFCHECK,
    }
}

/// Field distribution for `cfg`, resolving `--n-f auto`.
pub fn resolve_field(cfg: &RunConfig) -> Result<FieldDistribution, CliError> {
    let n_f = match cfg.n_f {
        FieldCutoff::Fixed(n) => n,
        FieldCutoff::Auto => auto_truncate(cfg.n_bar, AUTO_TRUNCATION_TOL)?,
    };
    Ok(thermal_field(cfg.n_bar, n_f)?)
}

fn require_out(cfg: &RunConfig) -> Result<&Path, CliError> {
    cfg.output_path
        .as_deref()
        .ok_or_else(|| CliError::Config("out: an output path is required".into()))
}

fn with_workers<T: Send>(
    workers: Option<usize>,
    job: impl FnOnce() -> T + Send,
) -> Result<(T, usize), CliError> {
    match workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Config(format!("workers: {e}")))?;
            Ok((pool.install(job), n))
        }
        None => Ok((job(), rayon::current_num_threads())),
    }
}

/// Fixed-width float: 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.16e}")
}

pub fn cmd_evolve(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let path = require_out(cfg)?;
    let start = Instant::now();
    let field = resolve_field(cfg)?;
    let atom = cfg.atom.to_state()?.density();
    let rho0 = product_state(&atom, &field.density())?;
    let t_grid = uniform_grid(cfg.t_max, cfg.dt)?;
    let opts = TrajectoryOptions {
        track_joint_entropy: true,
        ppt_threshold: Some(cfg.artifact_threshold),
        check_unitarity: true,
    };
    let (records, workers) = with_workers(cfg.workers, || trajectory(&rho0, &t_grid, &opts))?;
    let records = records?;
    check_records(&records)?;

    write_file(path, &evolve_csv(&records))?;
    let series = EntropySeries::from_records(&records);
    let p = exchange_parameter(&series, cfg.eps).ok().map(|x| x.p);
    let r_bar = r_parameter(&series, cfg.eps).ok().map(|x| x.r_bar);
    write_meta(
        path,
        json!({
            "command": "evolve",
            "config": cfg,
            "n_f": field.n_f(),
            "tail_mass": field.tail_mass(),
            "samples": records.len(),
            "P": p,
            "R_bar": r_bar,
            "wall_time_s": start.elapsed().as_secs_f64(),
            "workers": workers,
        }),
    )?;
    let show = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), fmt_float);
    let _ = writeln!(
        out,
        "wrote {} samples to {} (n_f = {}, P = {}, R_bar = {})",
        records.len(),
        path.display(),
        field.n_f(),
        show(p),
        show(r_bar)
    );
    Ok(())
}

fn check_records(records: &[TrajectoryRecord]) -> Result<(), CliError> {
    for r in records {
        let values = [
            r.s_atom,
            r.s_field,
            r.s_joint,
            r.purity_atom,
            r.purity_field,
            r.n_expect,
        ];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Numerical(format!(
                "non-finite value at lambda_t = {}",
                r.t
            )));
        }
        if r.trace_error > EVOLVE_TRACE_TOL {
            return Err(CliError::Numerical(format!(
                "trace drift {:e} at lambda_t = {}",
                r.trace_error, r.t
            )));
        }
        if let Some(u) = r.unitarity_residual.filter(|&u| u > EVOLVE_UNITARITY_TOL) {
            return Err(CliError::Numerical(format!(
                "propagator unitarity residual {u:e} at lambda_t = {}",
                r.t
            )));
        }
    }
    Ok(())
}

pub fn evolve_csv(records: &[TrajectoryRecord]) -> String {
    let mut s = String::with_capacity(records.len() * 240);
    s.push_str(EVOLVE_HEADER);
    s.push('\n');
    let (sa0, sf0) = (records[0].s_atom, records[0].s_field);
    for r in records {
        let (ds_a, ds_f) = (r.s_atom - sa0, r.s_field - sf0);
        let (lambda_m, n_neg) = r
            .ppt
            .as_ref()
            .map_or((0.0, 0), |p| (p.lambda_m, p.significant_negatives.len()));
        let floats = [
            r.t,
            r.s_atom,
            r.s_field,
            r.s_joint,
            ds_a,
            ds_f,
            ds_a + ds_f,
            r.purity_atom,
            r.purity_field,
            r.n_expect,
            lambda_m,
        ];
        for v in floats {
            s.push_str(&fmt_float(v));
            s.push(',');
        }
        let _ = writeln!(s, "{n_neg}");
    }
    s
}

pub fn cmd_sweep(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let path = require_out(cfg)?;
    let start = Instant::now();
    let field = resolve_field(cfg)?;
    let t_grid = uniform_grid(cfg.t_max, cfg.dt)?;
    let grid = SweepGrid::uniform(
        cfg.grid.n_theta,
        cfg.grid.n_r,
        cfg.n_bar,
        field.n_f(),
        t_grid,
    )?;
    let sweep_cfg = SweepConfig {
        diagnostics: cfg.diagnostics,
        eps: cfg.eps,
        artifact_threshold: cfg.artifact_threshold,
        workers: None,
    };
    let (cells, workers) = with_workers(cfg.workers, || run_sweep(&grid, &sweep_cfg))?;
    let cells = cells?;

    write_file(path, &sweep_csv(&cells))?;
    let failed = cells
        .iter()
        .filter(|c| {
            c.issues
                .iter()
                .any(|i| matches!(i, CellIssue::Failed(_) | CellIssue::InvariantViolation(_)))
        })
        .count();
    let exchange_cells = cells
        .iter()
        .filter(|c| matches!(c.p, Some(p) if p < -0.8))
        .count();
    write_meta(
        path,
        json!({
            "command": "sweep",
            "config": cfg,
            "n_f": field.n_f(),
            "tail_mass": field.tail_mass(),
            "cells": cells.len(),
            "cells_with_p_below_minus_0.8": exchange_cells,
            "cells_failed": failed,
            "wall_time_s": start.elapsed().as_secs_f64(),
            "workers": workers,
        }),
    )?;
    let _ = writeln!(
        out,
        "wrote {} cells to {} (n_f = {}, {} with P < -0.8, {} failed)",
        cells.len(),
        path.display(),
        field.n_f(),
        exchange_cells,
        failed
    );
    if failed > 0 {
        return Err(CliError::Numerical(format!(
            "{failed} sweep cells failed validation; see the status column"
        )));
    }
    Ok(())
}

/// Undefined or unrequested values are written as 0; the status column
/// says why.
pub fn sweep_csv(cells: &[SweepCell]) -> String {
    let mut s = String::with_capacity(cells.len() * 140);
    s.push_str(SWEEP_HEADER);
    s.push('\n');
    for c in cells {
        let e = match c.e {
            Some(EMeasure::Finite(v)) => fmt_float(v),
            Some(EMeasure::SeparableGrade) => "-inf".to_string(),
            None => fmt_float(0.0),
        };
        let status: String = c
            .status()
            .chars()
            .map(|ch| {
                if ch == ',' || ch == '\n' || ch == '\r' {
                    ';'
                } else {
                    ch
                }
            })
            .collect();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            fmt_float(c.theta),
            fmt_float(c.r),
            fmt_float(c.p.unwrap_or(0.0)),
            fmt_float(c.r_bar.unwrap_or(0.0)),
            e,
            c.n_significant_negatives,
            status
        );
    }
    s
}

pub fn cmd_fixed_point(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let bloch = fixed_point(cfg.n_bar)?;
    let (p_e, p_g) = fixed_point_populations(cfg.n_bar)?;
    let value = json!({
        "r": bloch.r(),
        "theta": bloch.theta(),
        "P_e": p_e,
        "P_g": p_g,
    });
    let text = serde_json::to_string_pretty(&value).expect("plain JSON object");
    if let Some(path) = &cfg.output_path {
        write_file(path, &format!("{text}\n"))?;
    }
    let _ = writeln!(out, "{text}");
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Config(format!("out: cannot write {}: {e}", path.display())))
}

/// Sidecar path: the output path with `.meta.json` appended.
pub fn meta_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn write_meta(out: &Path, value: serde_json::Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(&value).expect("plain JSON object");
    write_file(&meta_path(out), &format!("{text}\n"))
}
