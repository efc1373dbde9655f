//! Self-checks of the solver stack, shared by the `verify` CLI verb and the
//! test suite. Every check is deterministic (fixed seeds).

use std::fs;
use std::path::{Path, PathBuf};

use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

use crate::analysis::{blowup_bounds_closed, check_ordering, osgood_blows_up};
use crate::error::{Error, Result};
use crate::oracle::{exact_linear, refined_reference, refined_reference_grid};
use crate::problem::{ProblemSpec, RhsModel};
use crate::schemes::{apply_discrete_caputo, solve, GridConfig, L1Weights, Scheme};
use crate::specfun::{gamma_positive, MlOrder};

/// Environment variable that overrides [`default_fixtures_dir`].
pub const FIXTURES_ENV: &str = "CAPUTO_FIXTURES";

pub const CHECK_NAMES: [&str; 7] = [
    "weights",
    "sandwich",
    "ordering",
    "osgood",
    "linear_exact",
    "gronwall",
    "comparison",
];

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// `$CAPUTO_FIXTURES`, or the fixtures shipped with this crate.
pub fn default_fixtures_dir() -> PathBuf {
    std::env::var_os(FIXTURES_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures"))
}

/// Names of all checks, with one `fixtures:<stem>` entry per CSV in `fixtures_dir`.
pub fn available_checks(fixtures_dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = CHECK_NAMES.iter().map(|s| s.to_string()).collect();
    names.extend(
        fixture_files(fixtures_dir)
            .into_iter()
            .map(|(stem, _)| format!("fixtures:{stem}")),
    );
    names
}

fn fixture_files(dir: &Path) -> Vec<(String, PathBuf)> {
    let Ok(entries) = fs::read_dir(dir) else {
        return Vec::new();
    };
    let mut files: Vec<(String, PathBuf)> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .filter_map(|p| Some((p.file_stem()?.to_str()?.to_string(), p)))
        .collect();
    files.sort();
    files
}

/// `name == filter`, or `name` starts with `filter:` (so `fixtures` selects every fixture).
fn selected(name: &str, filter: Option<&str>) -> bool {
    match filter {
        None => true,
        Some(f) => {
            name == f
                || name
                    .strip_prefix(f)
                    .is_some_and(|rest| rest.starts_with(':'))
        }
    }
}

/// Runs every check selected by `filter`, in [`available_checks`] order.
pub fn run_checks(filter: Option<&str>, fixtures_dir: &Path) -> Result<Vec<CheckResult>> {
    let names: Vec<String> = available_checks(fixtures_dir)
        .into_iter()
        .filter(|n| selected(n, filter))
        .collect();
    if names.is_empty() {
        return Err(Error::Argument(format!(
            "no check matches filter {:?}",
            filter.unwrap_or("")
        )));
    }
    Ok(names.iter().map(|n| run_check(n, fixtures_dir)).collect())
}

fn run_check(name: &str, fixtures_dir: &Path) -> CheckResult {
    let outcome = match name {
        "weights" => check_weights(),
        "sandwich" => check_sandwich(),
        "ordering" => check_ordering_random(100),
        "osgood" => check_osgood(),
        "linear_exact" => check_linear_exact(),
        "gronwall" => check_gronwall(200),
        "comparison" => check_comparison(),
        other => match other.strip_prefix("fixtures:") {
            Some(stem) => check_fixture(&fixtures_dir.join(format!("{stem}.csv"))),
            None => Err(Error::Argument(format!("unknown check {other}"))),
        },
    };
    match outcome {
        Ok((passed, detail)) => CheckResult::new(name, passed, detail),
        Err(e) => CheckResult::new(name, false, format!("error: {e}")),
    }
}

type Outcome = Result<(bool, String)>;

/// L1 rows annihilate constants, `b_0 = 1/Γ(2−γ)`, `b_m ≤ 0` for `m ≥ 1`.
pub fn check_weights() -> Outcome {
    let mut worst = 0.0f64;
    let mut sign_ok = true;
    let mut b0_ok = true;
    for g in [0.05, 0.1, 0.3, 0.5, 0.6, 0.8, 0.95, 1.0] {
        let gamma = MlOrder::new(g)?;
        let w = L1Weights::new(gamma, 2000);
        b0_ok &= (w.b0() * gamma_positive(2.0 - g) - 1.0).abs() < 1e-14;
        sign_ok &= w.b()[1..].iter().all(|&b| b <= 0.0);
        for n in [1usize, 2, 9, 10, 100, 1999] {
            // row n of the L1 operator applied to u ≡ 1
            let row: f64 = w.b()[..n].iter().sum::<f64>() + w.b_tail(n);
            worst = worst.max(row.abs());
            let ones = vec![1.0; n + 2];
            let k = 1e-3;
            let d = apply_discrete_caputo(&ones, &w, n, k)? * k.powf(g);
            worst = worst.max(d.abs());
        }
    }
    let passed = worst <= 1e-13 && sign_ok && b0_ok;
    Ok((
        passed,
        format!("max |row sum| {worst:.2e}, signs {sign_ok}, b0 {b0_ok}"),
    ))
}

/// `u_ex^n ≤ u(nk) ≤ u_im^n` for `D^0.6 u = u^2`, `u0 = 1.2`, `k = 1e-3`, before the break.
pub fn check_sandwich() -> Outcome {
    let k = 1e-3;
    let problem = ProblemSpec::power_law(0.6, 1.0, 2.0, 1.2, 1.0)?;
    let ex = solve(
        &problem,
        &GridConfig::for_horizon(k, 1.0, Scheme::DiffExplicit)?,
    )?;
    let im = solve(
        &problem,
        &GridConfig::for_horizon(k, 1.0, Scheme::DiffImplicit)?,
    )?;
    let n = ex.len().min(im.len()) - 1;
    let reference = refined_reference_grid(&problem, k, n, 1e-4)?;
    let mut low = 0;
    let mut high = 0;
    let mut first_high = None;
    for (i, r) in reference.iter().enumerate() {
        if ex.values[i] > *r {
            low += 1;
        }
        if *r > im.values[i] {
            high += 1;
            first_high.get_or_insert(i);
        }
    }
    let detail = format!(
        "{} points, u_ex > u: {low}, u > u_im: {high}{}",
        n + 1,
        first_high
            .map(|i| format!(" (first at n={i})"))
            .unwrap_or_default()
    );
    Ok((low == 0 && high == 0, detail))
}

/// Implicit trajectories from ordered initial data stay ordered.
pub fn check_ordering_random(pairs: usize) -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x0dd);
    let mut violations = 0;
    for _ in 0..pairs {
        let g = rng.random_range(0.2..0.95);
        let a = rng.random_range(0.2..2.0);
        let p = rng.random_range(1.0..3.0);
        let lo = rng.random_range(0.05..1.0);
        let hi = lo * rng.random_range(1.0..2.0);
        let prob_lo = ProblemSpec::power_law(g, a, p, lo, 1.0)?;
        let horizon = horizon_before_blowup(&prob_lo.with_u0(hi)?, 1.0);
        let grid = GridConfig::for_horizon(horizon / 200.0, horizon, Scheme::DiffImplicit)?;
        let tl = solve(&prob_lo.with_horizon(horizon)?, &grid)?;
        let th = solve(&prob_lo.with_u0(hi)?.with_horizon(horizon)?, &grid)?;
        if !check_ordering(&tl, &th)? {
            violations += 1;
        }
    }
    Ok((
        violations == 0,
        format!("{pairs} pairs, {violations} violations"),
    ))
}

/// Half the closed-form lower bound on the blow-up time, capped at `cap`.
fn horizon_before_blowup(problem: &ProblemSpec, cap: f64) -> f64 {
    match problem.rhs.power_law_params() {
        Some((a, p)) if a > 0.0 && p > 1.0 => blowup_bounds_closed(problem.gamma, a, p, problem.u0)
            .map(|b| (0.5 * b.lower).min(cap))
            .unwrap_or(cap),
        _ => cap,
    }
}

/// Power law `u^p`: blow-up iff `p > 1`.
pub fn check_osgood() -> Outcome {
    let gamma = MlOrder::new(0.5)?;
    let mut wrong = Vec::new();
    for p in [1.1, 2.0, 3.0, 0.0, 0.5, 1.0] {
        if osgood_blows_up(&RhsModel::power_law(1.0, p)?, gamma, 1.0)? != (p > 1.0) {
            wrong.push(p);
        }
    }
    let mut rng = StdRng::seed_from_u64(0x05600d);
    let mut disagree = 0;
    for _ in 0..100 {
        let p = rng.random_range(f64::EPSILON..4.0);
        let a = rng.random_range(0.01..10.0);
        let g = MlOrder::new(rng.random_range(0.05..1.0))?;
        if osgood_blows_up(&RhsModel::power_law(a, p)?, g, 1.0)? != (p > 1.0) {
            disagree += 1;
        }
    }
    Ok((
        wrong.is_empty() && disagree == 0,
        format!("fixed p misclassified: {wrong:?}, random disagreements: {disagree}/100"),
    ))
}

/// Implicit scheme for `D^γ u = u` against `E_γ(t^γ)` at `t = 1`: the error
/// shrinks under refinement and is below 5e-3 at `k = 1e-3`.
pub fn check_linear_exact() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for g in [0.3, 0.5, 0.8] {
        let problem = ProblemSpec::power_law(g, 1.0, 1.0, 1.0, 1.0)?;
        let exact = exact_linear(problem.gamma, 1.0, 1.0, 1.0)?;
        let mut errs = Vec::new();
        for k in [4e-3, 2e-3, 1e-3] {
            let tr = solve(
                &problem,
                &GridConfig::for_horizon(k, 1.0, Scheme::DiffImplicit)?,
            )?;
            errs.push(((tr.values.last().copied().unwrap_or(f64::NAN) - exact) / exact).abs());
        }
        ok &= errs.windows(2).all(|w| w[1] < w[0]) && errs[2] <= 5e-3;
        parts.push(format!("γ={g}: {:.2e}", errs[2]));
    }
    Ok((
        ok,
        format!("relative error at t=1, k=1e-3: {}", parts.join(", ")),
    ))
}

/// Sequences below `u0 + quadrature(f∘w)` stay below the integral scheme.
pub fn check_gronwall(trials: usize) -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x6e0a11);
    let mut violations = 0;
    let steps = 200;
    for trial in 0..trials {
        let scheme = if trial % 2 == 0 {
            Scheme::IntegralProduct
        } else {
            Scheme::IntegralRectangle
        };
        let g: f64 = rng.random_range(0.1..0.95);
        let a = rng.random_range(0.1..2.0);
        let p = rng.random_range(0.0..3.0);
        let u0 = rng.random_range(0.05..2.0);
        let problem = ProblemSpec::power_law(g, a, p, u0, 1.0)?;
        let horizon = horizon_before_blowup(&problem, 1.0);
        let k = horizon / steps as f64;
        let grid = GridConfig::new(k, steps, scheme)?;
        let u = solve(&problem.with_horizon(horizon)?, &grid)?;
        let (coef, weight): (f64, Box<dyn Fn(usize) -> f64>) = match scheme {
            Scheme::IntegralProduct => (
                k.powf(g) / gamma_positive(1.0 + g),
                Box::new(move |j| (j as f64).powf(g) - (j as f64 - 1.0).powf(g)),
            ),
            _ => (
                k.powf(g) / gamma_positive(g),
                Box::new(move |j| (j as f64).powf(g - 1.0)),
            ),
        };
        let f = |w: f64| a * w.powf(p);
        let mut w = vec![u0 * (1.0 - rng.random_range(0.0..0.1))];
        for n in 1..u.len() {
            let q: f64 = (0..n).map(|m| f(w[m]) * weight(n - m)).sum();
            let slack = if rng.random_bool(0.2) {
                0.0
            } else {
                rng.random_range(0.0..0.2)
            };
            w.push(((u0 + coef * q) * (1.0 - slack)).max(0.0));
        }
        if w.iter()
            .zip(&u.values)
            .any(|(wn, un)| *wn > un * (1.0 + 1e-12))
        {
            violations += 1;
        }
    }
    Ok((
        violations == 0,
        format!("{trials} sequences, {violations} violations"),
    ))
}

/// `2u^2` dominates `u^2` from equal data.
pub fn check_comparison() -> Outcome {
    let mut violations = 0;
    let mut cases = 0;
    for g in [0.3, 0.6, 0.9] {
        for u0 in [0.12, 1.2] {
            let weak = ProblemSpec::power_law(g, 1.0, 2.0, u0, 1.0)?;
            let strong = ProblemSpec::power_law(g, 2.0, 2.0, u0, 1.0)?;
            let horizon = horizon_before_blowup(&strong, 1.0) * 1.8;
            for scheme in Scheme::ALL {
                let grid = GridConfig::for_horizon(horizon / 400.0, horizon, scheme)?;
                let lo = solve(&weak.with_horizon(horizon)?, &grid)?;
                let hi = solve(&strong.with_horizon(horizon)?, &grid)?;
                cases += 1;
                if lo.values.iter().zip(&hi.values).any(|(l, h)| l > h) {
                    violations += 1;
                }
            }
        }
    }
    Ok((
        violations == 0,
        format!("{cases} runs, {violations} violations"),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct FixtureRow {
    t: f64,
    value: f64,
    tol: f64,
}

fn read_fixture(path: &Path) -> Result<Vec<FixtureRow>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Argument(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("t,value,tol") {
        return Err(Error::Argument(format!(
            "{}: header must be t,value,tol",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Option<Vec<f64>> = fields.iter().map(|s| s.parse().ok()).collect();
        match parsed.as_deref() {
            Some(&[t, value, tol]) if t.is_finite() && value.is_finite() && tol >= 0.0 => {
                rows.push(FixtureRow { t, value, tol })
            }
            _ => {
                return Err(Error::Argument(format!(
                    "{} line {}: malformed row {line:?}",
                    path.display(),
                    i + 2
                )))
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Argument(format!("{} has no rows", path.display())));
    }
    Ok(rows)
}

/// Parses `<kind>_g<γ>_u<u0>` into `(kind, γ, u0)`.
fn parse_stem(stem: &str) -> Option<(&str, f64, f64)> {
    let (rest, u0) = stem.rsplit_once("_u")?;
    let (kind, g) = rest.rsplit_once("_g")?;
    Some((kind, g.parse().ok()?, u0.parse().ok()?))
}

/// Fixture kinds, keyed by file stem `<kind>_g<γ>_u<u0>`:
/// - `reference`: `D^γ u = u^2`, rows `(t, u(t))`, checked with the refined reference;
/// - `blowup_ladder`: `D^γ u = u^2`, rows `(k, T_b(k))` of the implicit scheme, which
///   must also refine monotonically;
/// - `decay`: `D^γ u = −u^2`, rows `(t, u(t))` of the implicit scheme at `k = 1e-3`.
pub fn check_fixture(path: &Path) -> Outcome {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default();
    let rows = read_fixture(path)?;
    let Some((kind, g, u0)) = parse_stem(stem) else {
        return Err(Error::Argument(format!(
            "{stem}: name must be <kind>_g<gamma>_u<u0>"
        )));
    };
    let mut worst = 0.0f64;
    let mut failed = Vec::new();
    let mut record = |t: f64, got: f64, row: &FixtureRow| {
        let err = (got - row.value).abs();
        worst = worst.max(err);
        if !(err <= row.tol) {
            failed.push(t);
        }
    };
    let mut extra = String::new();
    match kind {
        "reference" => {
            let problem = ProblemSpec::power_law(g, 1.0, 2.0, u0, 1.0)?;
            for row in &rows {
                let got = refined_reference(&problem.with_horizon(row.t)?, row.t, row.tol / 10.0)?;
                record(row.t, got, row);
            }
        }
        "blowup_ladder" => {
            let bounds = blowup_bounds_closed(MlOrder::new(g)?, 1.0, 2.0, u0)?;
            let problem = ProblemSpec::power_law(g, 1.0, 2.0, u0, bounds.upper)?;
            let mut times = Vec::new();
            for row in &rows {
                let grid = GridConfig::for_horizon(row.t, bounds.upper, Scheme::DiffImplicit)?;
                let tb = solve(&problem, &grid)?
                    .numerical_blowup_time
                    .unwrap_or(f64::NAN);
                record(row.t, tb, row);
                times.push((row.t, tb));
            }
            times.sort_by(|a, b| b.0.total_cmp(&a.0));
            let monotone = times
                .windows(3)
                .all(|w| (w[1].1 - w[2].1).abs() <= (w[0].1 - w[1].1).abs());
            if !monotone {
                failed.push(f64::NAN);
            }
            extra = format!(", monotone refinement {monotone}");
        }
        "decay" => {
            let horizon = rows.iter().map(|r| r.t).fold(0.0, f64::max);
            let problem = ProblemSpec::power_law(g, -1.0, 2.0, u0, horizon)?;
            let k = 1e-3;
            let tr = solve(
                &problem,
                &GridConfig::for_horizon(k, horizon, Scheme::DiffImplicit)?,
            )?;
            for row in &rows {
                let n = (row.t / k).round() as usize;
                let got = tr.values.get(n).copied().unwrap_or(f64::NAN);
                record(row.t, got, row);
            }
        }
        other => {
            return Err(Error::Argument(format!(
                "{stem}: unknown fixture kind {other}"
            )))
        }
    }
    let passed = failed.is_empty();
    let detail = if passed {
        format!("{} rows, max error {worst:.2e}{extra}", rows.len())
    } else {
        format!(
            "{} of {} rows out of tolerance{extra}",
            failed.len(),
            rows.len()
        )
    };
    Ok((passed, detail))
}
