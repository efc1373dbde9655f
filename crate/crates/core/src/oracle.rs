//! Reference solutions used to check the schemes.

use crate::error::{domain, Error, Result};
use crate::problem::{ProblemSpec, RhsKind};
use crate::schemes::{solve_integral_product, GridConfig, Scheme, Termination};
use crate::specfun::{ln_gamma_positive, mittag_leffler, MlOrder};

/// `u0 E_γ(λ t^γ)`, the solution of `D_c^γ u = λ u`, `u(0) = u0`.
pub fn exact_linear(gamma: MlOrder, lambda: f64, u0: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0) || !t.is_finite() {
        return domain(format!("t must be finite and non-negative, got {t}"));
    }
    if t == 0.0 {
        return Ok(u0);
    }
    Ok(u0 * mittag_leffler(gamma, lambda * t.powf(gamma.get()))?)
}

/// Truncated expansion `u(t) = Σ a_n t^{nγ}` for `D_c^γ u = A u^p`, integer `p ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSolution {
    pub gamma: MlOrder,
    pub coefficients: Vec<f64>,
    /// Times `t` below this are considered safe for [`series_eval`].
    pub validity_radius_estimate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    /// `|a_K t^{Kγ}|`, the last term kept.
    pub last_term: f64,
}

/// Coefficients `a_0..=a_K` from
/// `a_{n+1} Γ((n+1)γ+1) / Γ(nγ+1) = A (a^{*p})_n`.
pub fn series_coefficients(problem: &ProblemSpec, order: usize) -> Result<SeriesSolution> {
    let (a, p) = match problem.rhs.kind() {
        RhsKind::PowerLaw { a, p } => (*a, *p),
        RhsKind::General { .. } => {
            return Err(Error::Unsupported(
                "series oracle needs a power-law rhs".into(),
            ))
        }
    };
    if p < 1.0 || p.fract() != 0.0 || p > 64.0 {
        return Err(Error::Unsupported(format!(
            "series in t^γ is closed only for integer p ≥ 1, got p = {p}"
        )));
    }
    let p = p as usize;
    let g = problem.gamma.get();
    let mut coef = Vec::with_capacity(order + 1);
    coef.push(problem.u0);
    // powers[j][n] = (a^{*(j+2)})_n
    let mut powers: Vec<Vec<f64>> = vec![Vec::with_capacity(order + 1); p.saturating_sub(1)];
    for n in 0..order {
        for j in 0..powers.len() {
            let value = {
                let lower: &[f64] = if j == 0 { &coef } else { &powers[j - 1] };
                (0..=n).map(|i| coef[i] * lower[n - i]).sum::<f64>()
            };
            powers[j].push(value);
        }
        let conv = if p == 1 { coef[n] } else { powers[p - 2][n] };
        let ratio = (ln_gamma_positive(n as f64 * g + 1.0)
            - ln_gamma_positive((n + 1) as f64 * g + 1.0))
        .exp();
        let next = a * conv * ratio;
        if !next.is_finite() {
            return Err(Error::Overflow(format!(
                "series coefficient a_{} overflows",
                n + 1
            )));
        }
        coef.push(next);
    }
    let validity_radius_estimate = radius_estimate(&coef, g);
    Ok(SeriesSolution {
        gamma: problem.gamma,
        coefficients: coef,
        validity_radius_estimate,
    })
}

/// Root test on `|a_n|^{1/n}` over the upper half of the coefficients, with a
/// safety factor of one half in `τ = t^γ`.
fn radius_estimate(coef: &[f64], g: f64) -> f64 {
    let k = coef.len() - 1;
    let max_root = (k.div_ceil(2).max(1)..=k)
        .filter(|&n| coef[n] != 0.0)
        .map(|n| coef[n].abs().ln() / n as f64)
        .fold(f64::NEG_INFINITY, f64::max);
    if max_root == f64::NEG_INFINITY {
        return f64::INFINITY;
    }
    let tau = 0.5 * (-max_root).exp();
    tau.powf(1.0 / g)
}

/// `Σ a_n t^{nγ}` for `0 ≤ t < validity_radius_estimate`.
pub fn series_eval(series: &SeriesSolution, t: f64) -> Result<SeriesValue> {
    if !(t >= 0.0) {
        return domain(format!("t must be non-negative, got {t}"));
    }
    if t >= series.validity_radius_estimate {
        return Err(Error::Argument(format!(
            "t = {t} is beyond the estimated validity radius {}",
            series.validity_radius_estimate
        )));
    }
    let tau = t.powf(series.gamma.get());
    let value = series
        .coefficients
        .iter()
        .rev()
        .fold(0.0, |acc, &c| acc * tau + c);
    let k = series.coefficients.len() - 1;
    let last_term = (series.coefficients[k] * tau.powi(k as i32)).abs();
    Ok(SeriesValue { value, last_term })
}

/// Coarsest step count used by [`refined_reference`].
pub const DEFAULT_START_STEPS: usize = 16;
/// Finest grid the refinement may reach.
pub const MAX_REFERENCE_STEPS: usize = 1 << 17;

/// `u(t)` from product-integration runs on successively halved steps,
/// combined in a Richardson table.
pub fn refined_reference(problem: &ProblemSpec, t: f64, tol: f64) -> Result<f64> {
    if !(t >= 0.0) || t > problem.horizon * (1.0 + 1e-12) {
        return domain(format!(
            "t = {t} outside [0, horizon = {}]",
            problem.horizon
        ));
    }
    if t == 0.0 {
        return Ok(problem.u0);
    }
    let k = t / DEFAULT_START_STEPS as f64;
    refined_reference_with(problem, t, tol, k)
}

/// As [`refined_reference`] with an explicit starting step. `t` is rounded to
/// the nearest multiple of `k_start`.
pub fn refined_reference_with(
    problem: &ProblemSpec,
    t: f64,
    tol: f64,
    k_start: f64,
) -> Result<f64> {
    let n = (t / k_start).round() as usize;
    if n == 0 {
        return Ok(problem.u0);
    }
    let values = refined_reference_grid(problem, k_start, n, tol)?;
    Ok(values[n])
}

/// Reference values at `t_j = j k_coarse` for `j = 0..=n_points`.
///
/// The product scheme converges with order one at fixed `t > 0`; the table
/// eliminates error terms of order `k`, `k^{1+γ}`, `k^2` and `k^{1+2γ}`.
/// Refinement stops once two consecutive extrapolated grids differ by at most
/// `tol` at every point.
pub fn refined_reference_grid(
    problem: &ProblemSpec,
    k_coarse: f64,
    n_points: usize,
    tol: f64,
) -> Result<Vec<f64>> {
    if !(tol > 0.0) {
        return Err(Error::Argument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if n_points == 0 {
        return Ok(vec![problem.u0]);
    }
    let t_end = k_coarse * n_points as f64;
    let prob = problem.with_horizon(t_end)?;
    if problem
        .rhs
        .power_law_params()
        .is_some_and(|(a, _)| a == 0.0)
    {
        return Ok(vec![problem.u0; n_points + 1]);
    }
    let g = problem.gamma.get();
    let mut exps = [1.0, 1.0 + g, 2.0, 1.0 + 2.0 * g];
    exps.sort_by(f64::total_cmp);

    // rows[level][point]
    let mut table: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut best_prev: Option<Vec<f64>> = None;
    let mut level = 0usize;
    loop {
        let refine = 1usize << level;
        let steps = n_points
            .checked_mul(refine)
            .filter(|&s| s <= MAX_REFERENCE_STEPS);
        let Some(steps) = steps else {
            return Err(Error::Numerical(format!(
                "refined reference did not reach tolerance {tol} within {MAX_REFERENCE_STEPS} steps"
            )));
        };
        let grid = GridConfig::new(k_coarse / refine as f64, steps, Scheme::IntegralProduct)?;
        let tr = solve_integral_product(&prob, &grid)?;
        if tr.status != Termination::Completed {
            return Err(Error::Numerical(format!(
                "reference run at k = {} stopped early ({})",
                grid.k,
                tr.status.label()
            )));
        }
        let mut row: Vec<Vec<f64>> = vec![(0..=n_points).map(|j| tr.values[j * refine]).collect()];
        for (col, e) in exps.iter().enumerate() {
            let Some(prev_level) = table.last() else {
                break;
            };
            let Some(prev) = prev_level.get(col) else {
                break;
            };
            let cur = &row[col];
            let f = 2f64.powf(*e);
            let next: Vec<f64> = cur
                .iter()
                .zip(prev)
                .map(|(c, p)| (f * c - p) / (f - 1.0))
                .collect();
            row.push(next);
        }
        let mut best = row.last().cloned().unwrap_or_default();
        best[0] = problem.u0;
        if let Some(prev) = &best_prev {
            let diff = best
                .iter()
                .zip(prev)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if level >= 2 && diff <= tol {
                return Ok(best);
            }
        }
        best_prev = Some(best);
        table.push(row);
        level += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::gamma_fn;
    use proptest::prelude::*;

    fn order(g: f64) -> MlOrder {
        MlOrder::new(g).unwrap()
    }

    #[test]
    fn exact_linear_examples() {
        assert_eq!(exact_linear(order(0.4), 2.0, 3.0, 0.0).unwrap(), 3.0);
        let e = exact_linear(order(1.0), 1.0, 1.0, 1.0).unwrap();
        assert!((e - std::f64::consts::E).abs() < 1e-14);
        let v = exact_linear(order(0.5), 1.0, 2.0, 1.0).unwrap();
        assert!((v - 10.017960161524567).abs() < 1e-12);
        assert!(exact_linear(order(0.5), 1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn series_first_coefficient() {
        let p = ProblemSpec::power_law(0.6, 1.0, 2.0, 1.2, 1.0).unwrap();
        let s = series_coefficients(&p, 10).unwrap();
        assert_eq!(s.coefficients[0], 1.2);
        let a1 = 1.44 / gamma_fn(1.6).unwrap();
        assert!((s.coefficients[1] - a1).abs() < 1e-14);
        assert!((s.coefficients[1] - 1.61161).abs() < 1e-5);
    }

    #[test]
    fn series_zero_rhs() {
        let p = ProblemSpec::power_law(0.6, 0.0, 3.0, 1.2, 1.0).unwrap();
        let s = series_coefficients(&p, 10).unwrap();
        assert!(s.coefficients[1..].iter().all(|&c| c == 0.0));
        assert_eq!(s.validity_radius_estimate, f64::INFINITY);
        assert_eq!(series_eval(&s, 5.0).unwrap().value, 1.2);
    }

    #[test]
    fn series_linear_matches_mittag_leffler() {
        let (g, lam, u0) = (0.5, 1.0, 1.0);
        let p = ProblemSpec::power_law(g, lam, 1.0, u0, 1.0).unwrap();
        let s = series_coefficients(&p, 80).unwrap();
        for (n, c) in s.coefficients.iter().enumerate() {
            let expect = u0 * lam.powi(n as i32) / gamma_fn(n as f64 * g + 1.0).unwrap();
            assert!(((c - expect) / expect).abs() < 1e-12, "n={n}");
        }
        assert!(s.validity_radius_estimate > 0.5);
        for i in 0..=50 {
            let t = 0.01 * i as f64;
            let v = series_eval(&s, t).unwrap().value;
            let e = exact_linear(order(g), lam, u0, t).unwrap();
            assert!(((v - e) / e).abs() < 1e-10, "t={t}");
        }
        assert_eq!(series_eval(&s, 0.0).unwrap().value, u0);
    }

    #[test]
    fn series_rejects_non_integer_power_and_far_times() {
        let p = ProblemSpec::power_law(0.5, 1.0, 1.5, 1.0, 1.0).unwrap();
        assert!(matches!(
            series_coefficients(&p, 10),
            Err(Error::Unsupported(_))
        ));
        let q = ProblemSpec::power_law(0.6, 1.0, 2.0, 1.2, 1.0).unwrap();
        let s = series_coefficients(&q, 60).unwrap();
        assert!(s.validity_radius_estimate < 0.226);
        assert!(series_eval(&s, 0.3).is_err());
    }

    #[test]
    fn series_cubic_recurrence() {
        // p = 3: a_1 = A u0^3 / Γ(1+γ), a_2 = A 3 u0^2 a_1 Γ(1+γ)/Γ(1+2γ)
        let (g, u0) = (0.4, 0.7);
        let p = ProblemSpec::power_law(g, 2.0, 3.0, u0, 1.0).unwrap();
        let s = series_coefficients(&p, 3).unwrap();
        let a1 = 2.0 * u0.powi(3) / gamma_fn(1.0 + g).unwrap();
        let a2 = 2.0 * 3.0 * u0 * u0 * a1 * gamma_fn(1.0 + g).unwrap()
            / gamma_fn(1.0 + 2.0 * g).unwrap();
        assert!(((s.coefficients[1] - a1) / a1).abs() < 1e-14);
        assert!(((s.coefficients[2] - a2) / a2).abs() < 1e-13);
    }

    #[test]
    fn reference_zero_rhs() {
        let p = ProblemSpec::power_law(0.3, 0.0, 2.0, 0.8, 2.0).unwrap();
        assert_eq!(refined_reference(&p, 1.7, 1e-12).unwrap(), 0.8);
    }

    #[test]
    fn reference_linear_problem() {
        let p = ProblemSpec::power_law(0.5, 1.0, 1.0, 1.0, 1.0).unwrap();
        let v = refined_reference(&p, 1.0, 1e-6).unwrap();
        assert!((v - 5.008980080762283).abs() < 1e-6, "{v}");
    }

    #[test]
    fn reference_agrees_with_series_at_small_time() {
        let p = ProblemSpec::power_law(0.6, 1.0, 2.0, 1.2, 1.0).unwrap();
        let s = series_coefficients(&p, 60).unwrap();
        let sv = series_eval(&s, 0.01).unwrap();
        assert!(sv.last_term < 1e-14);
        let r = refined_reference(&p, 0.01, 1e-7).unwrap();
        assert!((r - sv.value).abs() < 1e-6, "{r} vs {}", sv.value);
    }

    #[test]
    fn reference_independent_of_start() {
        let p = ProblemSpec::power_law(0.6, 1.0, 2.0, 0.12, 1.0).unwrap();
        let tol = 1e-7;
        let a = refined_reference_with(&p, 1.0, tol, 1.0 / 16.0).unwrap();
        let b = refined_reference_with(&p, 1.0, tol, 1.0 / 24.0).unwrap();
        assert!((a - b).abs() <= 2.0 * tol, "{a} vs {b}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn positive_coefficients_for_growth(g in 0.1f64..1.0, a in 0.01f64..3.0, p in 1u32..5, u0 in 0.01f64..3.0) {
            let prob = ProblemSpec::power_law(g, a, p as f64, u0, 1.0).unwrap();
            let s = series_coefficients(&prob, 40).unwrap();
            prop_assert!(s.coefficients.iter().all(|&c| c > 0.0));
            prop_assert!(s.validity_radius_estimate > 0.0);
        }

        #[test]
        fn series_and_exact_linear_coincide(g in 0.2f64..1.0, lam in -2.0f64..2.0, u0 in 0.1f64..2.0, frac in 0.0f64..1.0) {
            let prob = ProblemSpec::power_law(g, lam, 1.0, u0, 1.0).unwrap();
            let s = series_coefficients(&prob, 120).unwrap();
            let t = frac * s.validity_radius_estimate.min(2.0);
            let v = series_eval(&s, t).unwrap().value;
            let e = exact_linear(prob.gamma, lam, u0, t).unwrap();
            prop_assert!((v - e).abs() <= 1e-10 * e.abs().max(1.0), "{} vs {}", v, e);
        }

        #[test]
        fn recurrence_residual(g in 0.1f64..1.0, a in 0.1f64..2.0, u0 in 0.1f64..2.0) {
            let prob = ProblemSpec::power_law(g, a, 2.0, u0, 1.0).unwrap();
            let s = series_coefficients(&prob, 30).unwrap();
            let c = &s.coefficients;
            for n in 0..30 {
                let conv: f64 = (0..=n).map(|i| c[i] * c[n - i]).sum();
                let lhs = c[n + 1] * gamma_fn((n + 1) as f64 * g + 1.0).unwrap() / gamma_fn(n as f64 * g + 1.0).unwrap();
                prop_assert!(((lhs - a * conv) / (a * conv)).abs() < 1e-12);
            }
        }
    }
}
