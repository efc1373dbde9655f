//! Library side of the `caputo` command-line tool: configuration, the
//! `solve`, `bounds` and `verify` commands, and CSV rendering.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;

use std::fmt::Write as _;
use std::path::Path;
use std::thread;

use caputo::analysis::{blowup_bounds_closed, blowup_bounds_optimized, estimate_blowup_time_auto};
use caputo::schemes::solve;
use caputo::verify::{run_checks, CheckResult};

pub use config::{Param, RunConfig, Sweep};

/// Steps per blow-up time used by the finest run of the `bounds` ladder.
pub const BOUNDS_FINE_STEPS: usize = 8000;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid {field}: {msg}")]
    Config { field: String, msg: String },
    #[error("numerical failure: {0}")]
    Numerical(#[from] caputo::Error),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(field: impl Into<String>, msg: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            msg: msg.into(),
        }
    }

    /// 2 configuration, 3 numerical failure, 4 verification failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Io { .. } => 2,
            CliError::Numerical(_) => 3,
            CliError::Verification(_) => 4,
        }
    }
}

/// 17 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Maps `f` over `items` on up to `available_parallelism` threads; the output
/// order is the input order.
pub fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(items.len())
        .max(1);
    let chunk = items.len().div_ceil(workers).max(1);
    thread::scope(|s| {
        let f = &f;
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(f).collect::<Vec<R>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

fn sweep_header(cfg: &RunConfig, skip: Option<Param>) -> Vec<&'static str> {
    cfg.sweeps
        .iter()
        .map(|s| s.param)
        .filter(|&p| Some(p) != skip)
        .map(Param::name)
        .collect()
}

fn sweep_prefix(coords: &[(Param, f64)], skip: Option<Param>) -> String {
    coords
        .iter()
        .filter(|(p, _)| Some(*p) != skip)
        .map(|(_, v)| format!("{},", fmt_num(*v)))
        .collect()
}

/// Trajectory CSV: `t,u,status` rows for every step, then a final row
/// `<numerical blow-up time or empty>,,<termination>`. Sweep parameters are
/// prepended as leading columns.
pub fn cmd_solve(cfg: &RunConfig) -> Result<String, CliError> {
    let points = cfg.expand();
    let jobs = points
        .iter()
        .map(|(_, c)| Ok((c.problem()?, c.grid()?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let runs = par_map(&jobs, |(problem, grid)| solve(problem, grid));
    let mut out = String::new();
    for name in sweep_header(cfg, None) {
        out.push_str(name);
        out.push(',');
    }
    out.push_str("t,u,status\n");
    for ((coords, _), run) in points.iter().zip(runs) {
        let tr = run?;
        let prefix = sweep_prefix(coords, None);
        for (n, u) in tr.values.iter().enumerate() {
            let _ = writeln!(out, "{prefix}{},{},ok", fmt_num(tr.t(n)), fmt_num(*u));
        }
        let tb = tr.numerical_blowup_time.map(fmt_num).unwrap_or_default();
        let _ = writeln!(out, "{prefix}{tb},,{}", tr.status.label());
    }
    Ok(out)
}

/// Blow-up time table `gamma,lower_cf,upper_cf,lower_opt,upper_opt,Tb_num`,
/// one row per sweep point. Rows outside the blow-up regime have empty bound
/// cells; `Tb_num` is `inconclusive` when no run broke down.
pub fn cmd_bounds(cfg: &RunConfig) -> Result<String, CliError> {
    let points = cfg.expand();
    for (_, c) in &points {
        c.problem()?;
    }
    let rows = par_map(&points, |(_, c)| bounds_row(c));
    let mut out = String::new();
    for name in sweep_header(cfg, Some(Param::Gamma)) {
        out.push_str(name);
        out.push(',');
    }
    out.push_str("gamma,lower_cf,upper_cf,lower_opt,upper_opt,Tb_num\n");
    for ((coords, c), row) in points.iter().zip(rows) {
        let _ = writeln!(
            out,
            "{}{},{}",
            sweep_prefix(coords, Some(Param::Gamma)),
            fmt_num(c.gamma),
            row?
        );
    }
    Ok(out)
}

fn bounds_row(c: &RunConfig) -> Result<String, CliError> {
    let gamma = c.order()?;
    let (Ok(closed), Ok(opt)) = (
        blowup_bounds_closed(gamma, c.a, c.p, c.u0),
        blowup_bounds_optimized(gamma, c.a, c.p, c.u0),
    ) else {
        return Ok(",,,,inconclusive".into());
    };
    let problem = c.problem()?.with_horizon(1.5 * closed.upper)?;
    let est = estimate_blowup_time_auto(&problem, BOUNDS_FINE_STEPS)?;
    let tb = est
        .extrapolated
        .map(fmt_num)
        .unwrap_or_else(|| "inconclusive".into());
    Ok(format!(
        "{},{},{},{},{tb}",
        fmt_num(closed.lower),
        fmt_num(closed.upper),
        fmt_num(opt.lower),
        fmt_num(opt.upper)
    ))
}

/// Runs the self-checks and renders one `PASS`/`FAIL` line per check.
pub fn cmd_verify(
    filter: Option<&str>,
    fixtures_dir: &Path,
) -> Result<(String, Vec<CheckResult>), CliError> {
    let results =
        run_checks(filter, fixtures_dir).map_err(|e| CliError::config("filter", e.to_string()))?;
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut out = String::new();
    for r in &results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(out, "{status}  {:width$}  {}", r.name, r.detail);
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    let _ = writeln!(out, "{} checks, {failed} failed", results.len());
    Ok((out, results))
}
