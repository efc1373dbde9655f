//! Blow-up analysis for `D_c^γ u = f(u)`: analytical bounds on the blow-up
//! time of `f(u) = A u^p`, the Osgood test, numerical blow-up times,
//! asymptotic rate checks and ordering of trajectories.

use std::thread;

use crate::error::{domain, Error, Result};
use crate::problem::{ProblemSpec, RhsKind, RhsModel};
use crate::quad::tanh_sinh;
use crate::schemes::{solve_diff_implicit, GridConfig, Scheme, Termination, Trajectory};
use crate::specfun::{gamma_positive, ln_gamma_positive, MlOrder};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMethod {
    ClosedForm,
    Optimized,
}

/// Bounds `lower ≤ T_b ≤ upper` for `D_c^γ u = A u^p`, `A > 0`, `p > 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupBounds {
    pub lower: f64,
    pub upper: f64,
    /// `G(p) = min(2^p, p^p / (p−1)^{p−1})`.
    pub g: f64,
    /// `H(p, γ) = max(p−1, 2^{−pγ/(p−1)})`.
    pub h: f64,
    pub method: BoundMethod,
    /// `(Γ(1+γ) / (A u0^{p−1}))^{1/γ}`, the common scale of both bounds.
    pub prefactor: f64,
    /// Optimal `r` for the lower bound (optimized bounds only).
    pub r_lower: Option<f64>,
    /// Optimal `(r, m)` for the upper bound; `r = ∞` marks the `r → ∞` limit.
    pub r_m_upper: Option<(f64, u32)>,
}

fn check_bound_args(gamma: MlOrder, a: f64, p: f64, u0: f64) -> Result<()> {
    if !(gamma.get() < 1.0) {
        return domain("blow-up bounds need 0 < γ < 1");
    }
    if !(a > 0.0) || !a.is_finite() {
        return domain(format!("blow-up bounds need A > 0, got {a}"));
    }
    if !(p > 1.0) || !p.is_finite() {
        return domain(format!("blow-up bounds need p > 1, got {p}"));
    }
    if !(u0 > 0.0) || !u0.is_finite() {
        return domain(format!("blow-up bounds need u0 > 0, got {u0}"));
    }
    Ok(())
}

fn ln_prefactor(g: f64, a: f64, p: f64, u0: f64) -> f64 {
    (ln_gamma_positive(1.0 + g) - a.ln() - (p - 1.0) * u0.ln()) / g
}

fn g_const(p: f64) -> f64 {
    let alt = (p * p.ln() - (p - 1.0) * (p - 1.0).ln()).exp();
    2f64.powf(p).min(alt)
}

fn h_const(p: f64, g: f64) -> f64 {
    (p - 1.0).max(2f64.powf(-p * g / (p - 1.0)))
}

fn finite_or_overflow(x: f64, what: &str) -> Result<f64> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(Error::Overflow(format!("{what} is not representable")))
    }
}

/// `((Γ(1+γ) / (A u0^{p−1} G))^{1/γ}, (Γ(1+γ) / (A u0^{p−1} H))^{1/γ})`.
pub fn blowup_bounds_closed(gamma: MlOrder, a: f64, p: f64, u0: f64) -> Result<BlowupBounds> {
    check_bound_args(gamma, a, p, u0)?;
    let g = gamma.get();
    let lp = ln_prefactor(g, a, p, u0);
    let gc = g_const(p);
    let hc = h_const(p, g);
    Ok(BlowupBounds {
        lower: finite_or_overflow((lp - gc.ln() / g).exp(), "lower bound")?,
        upper: finite_or_overflow((lp - hc.ln() / g).exp(), "upper bound")?,
        g: gc,
        h: hc,
        method: BoundMethod::ClosedForm,
        prefactor: lp.exp(),
        r_lower: None,
        r_m_upper: None,
    })
}

/// `ln(1 − e^{−y})` for `y > 0`.
fn ln_one_minus_exp_neg(y: f64) -> f64 {
    (-(-y).exp_m1()).ln()
}

/// `ln[(r^γ − 1)^{1/γ} / (r (r^{p−1} − 1))]` at `x = ln r`.
fn lower_objective(x: f64, g: f64, p: f64) -> f64 {
    ln_one_minus_exp_neg(g * x) / g - (p - 1.0) * x - ln_one_minus_exp_neg((p - 1.0) * x)
}

/// `r^p / (r^{(m+1)(p−1)} − r^{m(p−1)}) + ((1 − r^{mγ(1−p)}) / (p−1))^{1/γ}` at `x = ln r`.
fn upper_objective(x: f64, m: f64, g: f64, p: f64) -> f64 {
    let q = p - 1.0;
    let t1 = ((p - (m + 1.0) * q) * x - ln_one_minus_exp_neg(q * x)).exp();
    let t2 = ((ln_one_minus_exp_neg(m * g * q * x) - q.ln()) / g).exp();
    t1 + t2
}

const R_MAX: f64 = 1e4;
const M_MAX: u32 = 64;
const GRID_POINTS: usize = 400;
const LN_X_MIN: f64 = -14.0;

/// Maximises `phi` over `x ∈ [e^{LN_X_MIN}, x_max]`: log grid, then golden
/// section around the best grid point. `extra` are always evaluated.
fn maximise(phi: impl Fn(f64) -> f64, x_max: f64, extra: &[f64]) -> (f64, f64) {
    let hi = x_max.ln();
    let step = (hi - LN_X_MIN) / (GRID_POINTS - 1) as f64;
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    let mut best_i = 0;
    for i in 0..GRID_POINTS {
        let x = (LN_X_MIN + step * i as f64).exp();
        let v = phi(x);
        if v > best.1 {
            best = (x, v);
            best_i = i;
        }
    }
    let mut a = LN_X_MIN + step * best_i.saturating_sub(1) as f64;
    let mut b = LN_X_MIN + step * (best_i + 1).min(GRID_POINTS - 1) as f64;
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (phi(c.exp()), phi(d.exp()));
    for _ in 0..100 {
        if (b - a).abs() < 1e-13 {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = phi(c.exp());
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = phi(d.exp());
        }
    }
    for (x, v) in [(c.exp(), fc), (d.exp(), fd)] {
        if v > best.1 {
            best = (x, v);
        }
    }
    for &x in extra {
        let v = phi(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}

/// Numerical sup/inf over `r` (and `m`) of the two-sided estimate on `T_b`.
/// Falls back to the closed form if the search produces anything unusable.
pub fn blowup_bounds_optimized(gamma: MlOrder, a: f64, p: f64, u0: f64) -> Result<BlowupBounds> {
    let closed = blowup_bounds_closed(gamma, a, p, u0)?;
    let g = gamma.get();
    let lp = ln_prefactor(g, a, p, u0);
    let ln2 = std::f64::consts::LN_2;

    // lower: the closed form uses r = 2^{1/γ} and r = (p/(p−1))^{1/γ}
    let w1 = ln2 / g;
    let w2 = (p / (p - 1.0)).ln() / g;
    let x_max_l = R_MAX.ln().max(2.0 * w1).max(2.0 * w2);
    let (x_l, phi) = maximise(|x| lower_objective(x, g, p), x_max_l, &[w1, w2]);

    // upper: the closed form uses m = 1, r = 2^{1/(p−1)} and the r → ∞ limit
    let q = p - 1.0;
    let limit = (-q.ln() / g).exp();
    let mut best_u = (limit, f64::INFINITY, (1.0 / q).floor() as u32 + 1);
    let x_max_u = R_MAX.ln().max(2.0 * ln2 / q);
    for m in 1..=M_MAX {
        let extra: &[f64] = if m == 1 { &[ln2 / q] } else { &[] };
        let (x, neg) = maximise(|x| -upper_objective(x, m as f64, g, p), x_max_u, extra);
        let v = -neg;
        if v < best_u.0 {
            best_u = (v, x.exp(), m);
        }
    }

    let lower = (lp + phi).exp();
    let upper = (lp + best_u.0.ln()).exp();
    let usable = lower.is_finite() && upper.is_finite() && lower > 0.0 && lower <= upper;
    if !usable {
        return Ok(closed);
    }
    Ok(BlowupBounds {
        lower,
        upper,
        method: BoundMethod::Optimized,
        r_lower: Some(x_l.exp()),
        r_m_upper: Some((best_u.1, best_u.2)),
        ..closed
    })
}

/// Thresholds on `u0` separating the small-γ regimes of `D_c^γ u = A u^p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalValues {
    /// Below this, `T_b → ∞` as `γ → 0`.
    pub u01: f64,
    /// Above this, `T_b → 0` as `γ → 0`.
    pub u02: f64,
    /// `(p−1)/p (1/(pA))^{1/(p−1)}`, where `u − u0 = A u^p` stops having roots.
    pub u_crit: f64,
}

pub fn critical_initial_values(a: f64, p: f64) -> Result<CriticalValues> {
    if !(a > 0.0) || !a.is_finite() {
        return domain(format!("critical values need A > 0, got {a}"));
    }
    if !(p > 1.0) || !p.is_finite() {
        return domain(format!("critical values need p > 1, got {p}"));
    }
    let q = p - 1.0;
    let scale = a.powf(-1.0 / q);
    let u01 = scale * 2f64.powf(-p / q).max(q / p.powf(p / q));
    let u02 = scale * 1f64.min((1.0 / q).powf(1.0 / q));
    let u_crit = q / p * (1.0 / (p * a)).powf(1.0 / q);
    Ok(CriticalValues { u01, u02, u_crit })
}

/// Outcome of the Osgood integral test `∫_U^∞ (u/f(u))^{1/γ} du/u < ∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OsgoodDetail {
    pub blows_up: bool,
    /// `false` when the tail exponent is too close to the borderline.
    pub confident: bool,
    /// `∫_U^{10^6 U}` of the integrand (general `f` only).
    pub partial_integral: Option<f64>,
    /// Decay exponent `q` of the integrand in `ln u`; convergence iff `q > 1`.
    pub tail_exponent: Option<f64>,
}

const OSGOOD_SPAN: f64 = 1e6;

/// Whether solutions starting above `U` blow up in finite time.
pub fn osgood_blows_up(rhs: &RhsModel, gamma: MlOrder, u_start: f64) -> Result<bool> {
    osgood_test(rhs, gamma, u_start).map(|d| d.blows_up)
}

pub fn osgood_test(rhs: &RhsModel, gamma: MlOrder, u_start: f64) -> Result<OsgoodDetail> {
    if !rhs.is_nondecreasing() {
        return Err(Error::Precondition(
            "the Osgood test needs a nondecreasing f".into(),
        ));
    }
    let fu = rhs.eval(u_start)?;
    if !(fu > 0.0) {
        return Err(Error::Precondition(format!(
            "the Osgood test needs f(U) > 0, got {fu}"
        )));
    }
    if let RhsKind::PowerLaw { p, .. } = rhs.kind() {
        return Ok(OsgoodDetail {
            blows_up: *p > 1.0,
            confident: true,
            partial_integral: None,
            tail_exponent: None,
        });
    }
    let g = gamma.get();
    let x0 = u_start.ln();
    // integrand in x = ln u
    let h = |x: f64| -> f64 {
        let u = x.exp();
        match rhs.eval(u) {
            Ok(f) if f > 0.0 => (u / f).powf(1.0 / g),
            _ => f64::NAN,
        }
    };
    let span = OSGOOD_SPAN.ln();
    let partial = tanh_sinh(h, x0, x0 + span, 1e-10, 1e-300);
    if !partial.value.is_finite() {
        return Err(Error::Precondition(
            "f is not positive on [U, 10^6 U]".into(),
        ));
    }
    // local decay exponent of h against y = ln(u/U) + 1 over the last two decades of y
    let y = |x: f64| x - x0 + 1.0;
    let slope = |xa: f64, xb: f64| -> f64 {
        let (ha, hb) = (h(xa), h(xb));
        if hb == 0.0 {
            return f64::INFINITY;
        }
        -(hb / ha).ln() / (y(xb) / y(xa)).ln()
    };
    let far = x0 + 40.0 * span;
    let mid = x0 + 4.0 * span;
    let q_near = slope(x0 + span / 2.0, x0 + span);
    let q_mid = slope(mid, 2.0 * mid - x0);
    let q_far = slope(far, 2.0 * far - x0);
    let q = if q_far.is_nan() {
        if q_mid.is_nan() {
            q_near
        } else {
            q_mid
        }
    } else {
        q_far
    };
    if q.is_nan() {
        return Err(Error::Numerical(
            "could not estimate the Osgood tail exponent".into(),
        ));
    }
    let blows_up = q > 1.0;
    let agree = [q_near, q_mid]
        .iter()
        .all(|&qq| qq.is_nan() || (qq > 1.0) == blows_up);
    Ok(OsgoodDetail {
        blows_up,
        confident: agree && (q - 1.0).abs() > 0.2,
        partial_integral: Some(partial.value),
        tail_exponent: Some(q),
    })
}

/// One implicit run of a blow-up time ladder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupRun {
    pub k: f64,
    pub numerical_blowup_time: Option<f64>,
    pub status: Termination,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlowupEstimate {
    pub per_k: Vec<BlowupRun>,
    /// `None` when some run reached the horizon without a break.
    pub extrapolated: Option<f64>,
}

impl BlowupEstimate {
    pub fn is_conclusive(&self) -> bool {
        self.extrapolated.is_some()
    }
}

/// Runs the implicit scheme at each step of `k_ladder` (concurrently) and
/// extrapolates `T_b(k) = T_b + c k^γ` through the two finest steps.
pub fn estimate_blowup_time(problem: &ProblemSpec, k_ladder: &[f64]) -> Result<BlowupEstimate> {
    if k_ladder.len() < 2 {
        return Err(Error::Argument(
            "the k ladder needs at least two steps".into(),
        ));
    }
    let grids = k_ladder
        .iter()
        .map(|&k| GridConfig::for_horizon(k, problem.horizon, Scheme::DiffImplicit))
        .collect::<Result<Vec<_>>>()?;
    let results: Vec<Result<Trajectory>> = thread::scope(|s| {
        let handles: Vec<_> = grids
            .iter()
            .map(|grid| s.spawn(move || solve_diff_implicit(problem, grid)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("solver thread panicked"))
            .collect()
    });
    let mut per_k = Vec::with_capacity(results.len());
    for (grid, r) in grids.iter().zip(results) {
        let tr = r?;
        per_k.push(BlowupRun {
            k: grid.k,
            numerical_blowup_time: tr.numerical_blowup_time,
            status: tr.status,
        });
    }
    let mut runs: Vec<&BlowupRun> = per_k.iter().collect();
    runs.sort_by(|a, b| a.k.total_cmp(&b.k));
    let extrapolated = match (runs[0].numerical_blowup_time, runs[1].numerical_blowup_time) {
        (Some(t1), Some(t2)) if per_k.iter().all(|r| r.numerical_blowup_time.is_some()) => {
            let g = problem.gamma.get();
            let (k1, k2) = (runs[0].k.powf(g), runs[1].k.powf(g));
            Some((t1 * k2 - t2 * k1) / (k2 - k1))
        }
        _ => None,
    };
    Ok(BlowupEstimate {
        per_k,
        extrapolated,
    })
}

const PILOT_STEPS: usize = 2000;

/// [`estimate_blowup_time`] on a ladder scaled to the blow-up time: a pilot run
/// over `[0, horizon]` locates `T_b`, then the ladder uses
/// `T_pilot / fine_steps · {4, 2, 1}`.
pub fn estimate_blowup_time_auto(
    problem: &ProblemSpec,
    fine_steps: usize,
) -> Result<BlowupEstimate> {
    if fine_steps < 8 {
        return Err(Error::Argument("fine_steps must be at least 8".into()));
    }
    let mut horizon = problem.horizon;
    let mut pilot_time = None;
    for _ in 0..64 {
        let k = horizon / PILOT_STEPS as f64;
        let grid = GridConfig::new(k, PILOT_STEPS, Scheme::DiffImplicit)?;
        let tr = solve_diff_implicit(&problem.with_horizon(horizon)?, &grid)?;
        match tr.status {
            Termination::BlowupBreak { n_star } if n_star < PILOT_STEPS / 8 => {
                horizon = (n_star + 2) as f64 * k * 2.0;
            }
            Termination::BlowupBreak { .. } => {
                pilot_time = tr.numerical_blowup_time;
                break;
            }
            status => {
                return Ok(BlowupEstimate {
                    per_k: vec![BlowupRun {
                        k,
                        numerical_blowup_time: None,
                        status,
                    }],
                    extrapolated: None,
                });
            }
        }
    }
    let t_pilot = pilot_time
        .ok_or_else(|| Error::Numerical("pilot runs did not resolve the blow-up time".into()))?;
    let fine = t_pilot / fine_steps as f64;
    let ladder = [4.0 * fine, 2.0 * fine, fine];
    let run_horizon = (2.0 * t_pilot).min(problem.horizon);
    estimate_blowup_time(&problem.with_horizon(run_horizon)?, &ladder)
}

/// Least-squares fit of `u − u0 ≈ amplitude · ((T_b − t)^{−1} − T_b^{−1})^{exponent}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthFit {
    pub exponent: f64,
    pub amplitude: f64,
    /// `γ / (p − 1)`.
    pub theoretical_exponent: f64,
    /// `[Γ(pγ/(p−1)) / (A Γ(γ/(p−1)))]^{1/(p−1)}`.
    pub theoretical_amplitude: f64,
    pub samples: usize,
}

/// `(γ/(p−1), [Γ(pγ/(p−1)) / (A Γ(γ/(p−1)))]^{1/(p−1)})`.
pub fn theoretical_growth(gamma: MlOrder, a: f64, p: f64) -> Result<(f64, f64)> {
    if !(a > 0.0) || !(p > 1.0) {
        return domain(format!(
            "growth rate needs A > 0 and p > 1, got A={a}, p={p}"
        ));
    }
    let g = gamma.get();
    let q = p - 1.0;
    let amp = (gamma_positive(p * g / q) / (a * gamma_positive(g / q))).powf(1.0 / q);
    Ok((g / q, amp))
}

/// Fits the growth law on samples with `t ∈ [(1 − window) T_b, T_b)`.
pub fn fit_blowup_exponent(
    trajectory: &Trajectory,
    problem: &ProblemSpec,
    t_b: f64,
    window: f64,
) -> Result<GrowthFit> {
    let Some((a, p)) = problem.rhs.power_law_params() else {
        return Err(Error::Unsupported(
            "growth fit needs a power-law rhs".into(),
        ));
    };
    if !(window > 0.0 && window <= 1.0) {
        return Err(Error::Argument(format!(
            "window must lie in (0, 1], got {window}"
        )));
    }
    if !(t_b > 0.0) || !t_b.is_finite() {
        return Err(Error::Argument(format!(
            "T_b must be finite and positive, got {t_b}"
        )));
    }
    let (theo_e, theo_a) = theoretical_growth(problem.gamma, a, p)?;
    let u0 = problem.u0;
    let t_from = (1.0 - window) * t_b;
    let pts: Vec<(f64, f64)> = trajectory
        .values
        .iter()
        .enumerate()
        .filter_map(|(n, &u)| {
            let t = trajectory.t(n);
            (t >= t_from && t < t_b && u > u0)
                .then(|| ((1.0 / (t_b - t) - 1.0 / t_b).ln(), (u - u0).ln()))
        })
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    if pts.len() < 8 {
        return Err(Error::InsufficientData(format!(
            "{} usable samples in the fit window, need 8",
            pts.len()
        )));
    }
    let nf = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientData(
            "fit abscissae are degenerate".into(),
        ));
    }
    let slope = sxy / sxx;
    Ok(GrowthFit {
        exponent: slope,
        amplitude: (my - slope * mx).exp(),
        theoretical_exponent: theo_e,
        theoretical_amplitude: theo_a,
        samples: pts.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayCheck {
    pub holds: bool,
    /// `min u^p / [(u0 / (2|A|)) t^{−γ} / Γ(1−γ)]` over the checked samples.
    pub margin: f64,
    pub samples: usize,
}

/// Checks `u^p ≥ (u0/(2|A|)) t^{−γ}/Γ(1−γ)` on the second half of the run.
pub fn decay_lower_bound_check(
    trajectory: &Trajectory,
    problem: &ProblemSpec,
) -> Result<DecayCheck> {
    decay_lower_bound_check_from(trajectory, problem, 0.5 * trajectory.last_time())
}

/// As [`decay_lower_bound_check`] for samples with `t ≥ t_min`.
pub fn decay_lower_bound_check_from(
    trajectory: &Trajectory,
    problem: &ProblemSpec,
    t_min: f64,
) -> Result<DecayCheck> {
    let Some((a, p)) = problem.rhs.power_law_params() else {
        return Err(Error::Unsupported(
            "decay check needs a power-law rhs".into(),
        ));
    };
    if !(a < 0.0) || !(p >= 1.0) {
        return Err(Error::Precondition(format!(
            "decay check needs A < 0 and p ≥ 1, got A={a}, p={p}"
        )));
    }
    let g = problem.gamma.get();
    if !(g < 1.0) {
        return Err(Error::Precondition("decay check needs γ < 1".into()));
    }
    if matches!(trajectory.status, Termination::DomainExit { .. })
        || trajectory.values.iter().any(|&u| !(u > 0.0))
    {
        return Err(Error::Precondition("trajectory reached zero".into()));
    }
    let c = problem.u0 / (2.0 * a.abs()) / gamma_positive(1.0 - g);
    let mut margin = f64::INFINITY;
    let mut samples = 0;
    for (n, &u) in trajectory.values.iter().enumerate() {
        let t = trajectory.t(n);
        if t <= 0.0 || t < t_min {
            continue;
        }
        let bound = c * t.powf(-g);
        margin = margin.min(u.powf(p) / bound);
        samples += 1;
    }
    if samples == 0 {
        return Err(Error::InsufficientData(format!(
            "no samples with t ≥ {t_min}"
        )));
    }
    Ok(DecayCheck {
        holds: margin >= 1.0,
        margin,
        samples,
    })
}

/// `true` iff `low.values[n] ≤ high.values[n]` for every common index.
pub fn check_ordering(low: &Trajectory, high: &Trajectory) -> Result<bool> {
    if low.scheme != high.scheme {
        return Err(Error::Argument(format!(
            "schemes differ: {} vs {}",
            low.scheme, high.scheme
        )));
    }
    if low.gamma != high.gamma {
        return Err(Error::Argument("orders γ differ".into()));
    }
    if (low.k - high.k).abs() > 1e-15 * low.k.max(high.k) {
        return Err(Error::Argument(format!(
            "steps differ: {} vs {}",
            low.k, high.k
        )));
    }
    Ok(low.values.iter().zip(&high.values).all(|(l, h)| l <= h))
}
