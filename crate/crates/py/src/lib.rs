//! Python bindings: `import caputo_py`.

use pyo3::exceptions::{PyOverflowError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use caputo::analysis;
use caputo::schemes::solve as solve_problem;
use caputo::verify;
use caputo::{Error, GridConfig, MlOrder, ProblemSpec, RhsModel, Scheme};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Overflow(m) => PyOverflowError::new_err(m),
        Error::Numerical(m) | Error::InsufficientData(m) => PyRuntimeError::new_err(m),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn order(gamma: f64) -> PyResult<MlOrder> {
    MlOrder::new(gamma).map_err(to_py)
}

/// Γ(x).
#[pyfunction]
fn gamma(x: f64) -> PyResult<f64> {
    caputo::specfun::gamma_fn(x).map_err(to_py)
}

/// E_γ(z).
#[pyfunction]
fn mittag_leffler(gamma: f64, z: f64) -> PyResult<f64> {
    caputo::specfun::mittag_leffler(order(gamma)?, z).map_err(to_py)
}

/// Integrates D^γ u = A u^p and returns a dict with `t`, `u`, `status` and
/// `blowup_time` (None unless the implicit scheme broke down).
#[pyfunction]
#[pyo3(signature = (gamma, a, p, u0, horizon, k, scheme = "diff-im"))]
#[allow(clippy::too_many_arguments)]
fn solve<'py>(
    py: Python<'py>,
    gamma: f64,
    a: f64,
    p: f64,
    u0: f64,
    horizon: f64,
    k: f64,
    scheme: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let scheme: Scheme = scheme.parse().map_err(to_py)?;
    let problem = ProblemSpec::power_law(gamma, a, p, u0, horizon).map_err(to_py)?;
    let grid = GridConfig::for_horizon(k, horizon, scheme).map_err(to_py)?;
    let tr = py
        .detach(|| solve_problem(&problem, &grid))
        .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("t", tr.times().collect::<Vec<f64>>())?;
    out.set_item("u", &tr.values)?;
    out.set_item("status", tr.status.label())?;
    out.set_item("blowup_time", tr.numerical_blowup_time)?;
    Ok(out)
}

/// `(lower, upper)` bounds on the blow-up time of D^γ u = A u^p.
#[pyfunction]
#[pyo3(signature = (gamma, a, p, u0, optimized = false))]
fn blowup_bounds(gamma: f64, a: f64, p: f64, u0: f64, optimized: bool) -> PyResult<(f64, f64)> {
    let g = order(gamma)?;
    let b = if optimized {
        analysis::blowup_bounds_optimized(g, a, p, u0)
    } else {
        analysis::blowup_bounds_closed(g, a, p, u0)
    }
    .map_err(to_py)?;
    Ok((b.lower, b.upper))
}

/// `(u01, u02, u_crit)`.
#[pyfunction]
fn critical_initial_values(a: f64, p: f64) -> PyResult<(f64, f64, f64)> {
    let c = analysis::critical_initial_values(a, p).map_err(to_py)?;
    Ok((c.u01, c.u02, c.u_crit))
}

#[pyfunction]
fn osgood_blows_up(a: f64, p: f64, gamma: f64, u_start: f64) -> PyResult<bool> {
    let rhs = RhsModel::power_law(a, p).map_err(to_py)?;
    analysis::osgood_blows_up(&rhs, order(gamma)?, u_start).map_err(to_py)
}

/// Extrapolated blow-up time, or None when no run broke down.
#[pyfunction]
#[pyo3(signature = (gamma, a, p, u0, horizon, fine_steps = 8000))]
fn estimate_blowup_time(
    py: Python<'_>,
    gamma: f64,
    a: f64,
    p: f64,
    u0: f64,
    horizon: f64,
    fine_steps: usize,
) -> PyResult<Option<f64>> {
    let problem = ProblemSpec::power_law(gamma, a, p, u0, horizon).map_err(to_py)?;
    let est = py
        .detach(|| analysis::estimate_blowup_time_auto(&problem, fine_steps))
        .map_err(to_py)?;
    Ok(est.extrapolated)
}

/// Runs the self-checks; returns `(name, passed, detail)` triples.
#[pyfunction]
#[pyo3(signature = (filter = None))]
fn run_checks(py: Python<'_>, filter: Option<String>) -> PyResult<Vec<(String, bool, String)>> {
    let dir = verify::default_fixtures_dir();
    let results = py
        .detach(|| verify::run_checks(filter.as_deref(), &dir))
        .map_err(to_py)?;
    Ok(results
        .into_iter()
        .map(|r| (r.name, r.passed, r.detail))
        .collect())
}

#[pymodule]
fn caputo_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(gamma, m)?)?;
    m.add_function(wrap_pyfunction!(mittag_leffler, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(blowup_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(critical_initial_values, m)?)?;
    m.add_function(wrap_pyfunction!(osgood_blows_up, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_blowup_time, m)?)?;
    m.add_function(wrap_pyfunction!(run_checks, m)?)?;
    Ok(())
}
