//! Time-stepping schemes on the uniform grid `t_n = n k`.
//!
//! Two explicit product-integration schemes for the Volterra form and the
//! explicit/implicit L1 schemes for the differential form. All four keep the
//! full history and cost `O(N^2)` for `N` steps.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::problem::{ProblemSpec, RhsKind, RhsModel};
use crate::specfun::{gamma_positive, MlOrder};

/// Default step cap.
pub const DEFAULT_N_MAX: usize = 1_000_000;

/// Refuse runs whose working arrays would exceed this many bytes.
const MEMORY_LIMIT_BYTES: usize = 1 << 30;
/// Working arrays per step (values, history, weights).
const BYTES_PER_STEP: usize = 3 * std::mem::size_of::<f64>();

const BISECTION_MAX_ITER: usize = 200;
const BRACKET_MAX_EXPANSIONS: usize = 2100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Product integration with exact integrals of the kernel.
    IntegralProduct,
    /// Left-rectangle rule on the kernel.
    IntegralRectangle,
    /// L1 discretisation, `f` evaluated at the old level.
    DiffExplicit,
    /// L1 discretisation, `f` evaluated at the new level.
    DiffImplicit,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::IntegralProduct,
        Scheme::IntegralRectangle,
        Scheme::DiffExplicit,
        Scheme::DiffImplicit,
    ];

    /// Short name used on the command line.
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::IntegralProduct => "int-prod",
            Scheme::IntegralRectangle => "int-rect",
            Scheme::DiffExplicit => "diff-ex",
            Scheme::DiffImplicit => "diff-im",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.as_str() == s)
            .ok_or_else(|| {
                Error::Argument(format!(
                    "unknown scheme '{s}' (expected int-prod, int-rect, diff-ex or diff-im)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub k: f64,
    pub n_max: usize,
    pub scheme: Scheme,
}

impl GridConfig {
    pub fn new(k: f64, n_max: usize, scheme: Scheme) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::Argument(format!(
                "step k must be finite and positive, got {k}"
            )));
        }
        if n_max == 0 {
            return Err(Error::Argument("n_max must be at least 1".into()));
        }
        Ok(Self { k, n_max, scheme })
    }

    /// Largest grid with step `k` that stays inside `[0, horizon]`.
    pub fn for_horizon(k: f64, horizon: f64, scheme: Scheme) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::Argument(format!(
                "horizon must be finite and positive, got {horizon}"
            )));
        }
        let steps = (horizon / k * (1.0 + 1e-12)).floor();
        if !(steps < usize::MAX as f64) {
            return Err(Error::Argument(format!(
                "horizon {horizon} with k={k} needs too many steps"
            )));
        }
        Self::new(k, (steps as usize).max(1), scheme)
    }

    /// Checks the grid against a problem's horizon and the memory guard.
    pub fn validate(&self, problem: &ProblemSpec) -> Result<()> {
        let span = self.k * self.n_max as f64;
        if span > (problem.horizon + self.k) * (1.0 + 1e-12) {
            return Err(Error::Argument(format!(
                "k·n_max = {span} exceeds horizon {} + k",
                problem.horizon
            )));
        }
        let bytes = (self.n_max + 1).saturating_mul(BYTES_PER_STEP);
        if bytes > MEMORY_LIMIT_BYTES {
            return Err(Error::Argument(format!(
                "n_max = {} needs about {} MiB of history; limit is {} MiB",
                self.n_max,
                bytes >> 20,
                MEMORY_LIMIT_BYTES >> 20
            )));
        }
        Ok(())
    }
}

/// Coefficients of the L1 discrete Caputo operator.
///
/// With `a = 1 − γ`:
/// `Γ(2−γ) b_0 = 1`, `Γ(2−γ) b_m = (m+1)^a − 2m^a + (m−1)^a` for `m ≥ 1`, and the
/// last coefficient of row `n` is `Γ(2−γ) b_tail(n) = (n−1)^a − n^a`.
/// `d_m = (m+1)^a − m^a` are the increments' weights in the difference form.
#[derive(Debug, Clone)]
pub struct L1Weights {
    gamma: MlOrder,
    inv_gamma2: f64,
    b: Vec<f64>,
    d: Vec<f64>,
}

impl L1Weights {
    /// Table of `b_0..=b_n`.
    pub fn new(gamma: MlOrder, n: usize) -> Self {
        let mut w = Self {
            gamma,
            inv_gamma2: 1.0 / gamma_positive(2.0 - gamma.get()),
            b: Vec::with_capacity(n + 1),
            d: Vec::with_capacity(n + 1),
        };
        w.extend_to(n);
        w
    }

    fn extend_to(&mut self, n: usize) {
        let a = 1.0 - self.gamma.get();
        for m in self.d.len()..=n {
            self.d.push(l1_increment(a, m));
            self.b.push(l1_second_difference(a, m) * self.inv_gamma2);
        }
    }

    pub fn gamma(&self) -> MlOrder {
        self.gamma
    }

    /// Largest `n` covered by the table.
    pub fn n(&self) -> usize {
        self.b.len() - 1
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// Increment weights `d_m = (m+1)^{1−γ} − m^{1−γ}` (not scaled by `Γ(2−γ)`).
    pub fn d(&self) -> &[f64] {
        &self.d
    }

    /// `1 / Γ(2−γ)`.
    pub fn b0(&self) -> f64 {
        self.inv_gamma2
    }

    /// Last coefficient of row `j ≥ 1`: `((j−1)^{1−γ} − j^{1−γ}) / Γ(2−γ)`.
    pub fn b_tail(&self, j: usize) -> f64 {
        assert!(j >= 1, "b_tail is defined for j ≥ 1");
        let a = 1.0 - self.gamma.get();
        let dj = self
            .d
            .get(j - 1)
            .copied()
            .unwrap_or_else(|| l1_increment(a, j - 1));
        -dj * self.inv_gamma2
    }
}

/// `L1Weights::new` as a free function.
pub fn l1_weights(gamma: MlOrder, n: usize) -> L1Weights {
    L1Weights::new(gamma, n)
}

/// `(m+1)^a − m^a`.
fn l1_increment(a: f64, m: usize) -> f64 {
    if m == 0 {
        return 1.0;
    }
    let mf = m as f64;
    mf.powf(a) * (a * (1.0 / mf).ln_1p()).exp_m1()
}

/// `(m+1)^a − 2m^a + (m−1)^a` for `m ≥ 1`, and `1` for `m = 0`.
fn l1_second_difference(a: f64, m: usize) -> f64 {
    match m {
        0 => 1.0,
        1..=8 => l1_increment(a, m) - l1_increment(a, m - 1),
        _ => {
            // m^a [(1+h)^a + (1−h)^a − 2] = 2 m^a Σ_{j≥1} C(a, 2j) h^{2j}
            let mf = m as f64;
            let h2 = 1.0 / (mf * mf);
            let mut binom = a * (a - 1.0) / 2.0;
            let mut hp = h2;
            let mut sum = binom * hp;
            let mut n = 2.0;
            for _ in 0..60 {
                binom *= (a - n) * (a - n - 1.0) / ((n + 1.0) * (n + 2.0));
                n += 2.0;
                hp *= h2;
                let term = binom * hp;
                sum += term;
                if term.abs() <= 1e-18 * sum.abs() {
                    break;
                }
            }
            2.0 * mf.powf(a) * sum
        }
    }
}

/// `(D_h^γ u)_{n+1}` from `values[0..=n+1]`.
pub fn apply_discrete_caputo(values: &[f64], weights: &L1Weights, n: usize, k: f64) -> Result<f64> {
    if values.len() < n + 2 {
        return Err(Error::Argument(format!(
            "need at least {} values for step {}, got {}",
            n + 2,
            n + 1,
            values.len()
        )));
    }
    if weights.n() < n {
        return Err(Error::Argument(format!(
            "weight table covers n ≤ {}, requested {n}",
            weights.n()
        )));
    }
    if !(k > 0.0) {
        return Err(Error::Argument(format!("step k must be positive, got {k}")));
    }
    let d = weights.d();
    let mut acc = 0.0;
    for m in 0..=n {
        acc += (values[n + 1 - m] - values[n - m]) * d[m];
    }
    Ok(acc * weights.b0() * k.powf(-weights.gamma().get()))
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// `n_max` steps were taken. This says nothing about global existence.
    Completed,
    /// The implicit equation had no admissible root; `n_star` is the index of
    /// the last computed value.
    BlowupBreak { n_star: usize },
    /// The value at `step` left the domain of `f`; it is not stored.
    DomainExit { step: usize },
    /// The value at `step` was not finite; it is not stored.
    Overflow { step: usize },
}

impl Termination {
    pub fn label(&self) -> &'static str {
        match self {
            Termination::Completed => "completed",
            Termination::BlowupBreak { .. } => "blowup",
            Termination::DomainExit { .. } => "domain_exit",
            Termination::Overflow { .. } => "overflow",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub k: f64,
    pub gamma: MlOrder,
    pub scheme: Scheme,
    /// `u^0..=u^N`.
    pub values: Vec<f64>,
    pub status: Termination,
    /// `n_star · k` for a blow-up break.
    pub numerical_blowup_time: Option<f64>,
}

impl Trajectory {
    fn finish(
        k: f64,
        gamma: MlOrder,
        scheme: Scheme,
        values: Vec<f64>,
        status: Termination,
    ) -> Self {
        let numerical_blowup_time = match status {
            Termination::BlowupBreak { n_star } => Some(n_star as f64 * k),
            _ => None,
        };
        Self {
            k,
            gamma,
            scheme,
            values,
            status,
            numerical_blowup_time,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn u0(&self) -> f64 {
        self.values[0]
    }

    pub fn t(&self, n: usize) -> f64 {
        n as f64 * self.k
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(|n| self.t(n))
    }

    pub fn last_time(&self) -> f64 {
        self.t(self.values.len() - 1)
    }

    pub fn broke_up(&self) -> bool {
        matches!(self.status, Termination::BlowupBreak { .. })
    }
}

/// Runs the scheme selected in `grid`.
pub fn solve(problem: &ProblemSpec, grid: &GridConfig) -> Result<Trajectory> {
    match grid.scheme {
        Scheme::IntegralProduct => solve_integral_product(problem, grid),
        Scheme::IntegralRectangle => solve_integral_rectangle(problem, grid),
        Scheme::DiffExplicit => solve_diff_explicit(problem, grid),
        Scheme::DiffImplicit => solve_diff_implicit(problem, grid),
    }
}

fn expect_scheme(grid: &GridConfig, scheme: Scheme) -> Result<()> {
    if grid.scheme != scheme {
        return Err(Error::Argument(format!(
            "grid selects scheme {}, solver is {}",
            grid.scheme, scheme
        )));
    }
    Ok(())
}

/// Classifies a freshly computed value; `None` means keep going.
fn check_value(rhs: &RhsModel, u: f64, step: usize) -> Option<Termination> {
    if !u.is_finite() {
        Some(Termination::Overflow { step })
    } else if !rhs.in_domain(u) {
        Some(Termination::DomainExit { step })
    } else {
        None
    }
}

/// `u^n = u0 + k^γ/Γ(1+γ) Σ_{m<n} f(u^m) ((n−m)^γ − (n−m−1)^γ)`.
pub fn solve_integral_product(problem: &ProblemSpec, grid: &GridConfig) -> Result<Trajectory> {
    expect_scheme(grid, Scheme::IntegralProduct)?;
    let g = problem.gamma.get();
    let coef = grid.k.powf(g) / gamma_positive(1.0 + g);
    integral_scheme(problem, grid, coef, |j| {
        if j == 1 {
            1.0
        } else {
            // j^γ − (j−1)^γ without cancellation
            let jf = j as f64;
            -jf.powf(g) * (g * (-1.0 / jf).ln_1p()).exp_m1()
        }
    })
}

/// `u^n = u0 + k^γ/Γ(γ) Σ_{m<n} f(u^m) (n−m)^{γ−1}`.
pub fn solve_integral_rectangle(problem: &ProblemSpec, grid: &GridConfig) -> Result<Trajectory> {
    expect_scheme(grid, Scheme::IntegralRectangle)?;
    let g = problem.gamma.get();
    let coef = grid.k.powf(g) / gamma_positive(g);
    integral_scheme(problem, grid, coef, |j| (j as f64).powf(g - 1.0))
}

fn integral_scheme(
    problem: &ProblemSpec,
    grid: &GridConfig,
    coef: f64,
    weight: impl Fn(usize) -> f64,
) -> Result<Trajectory> {
    grid.validate(problem)?;
    let rhs = &problem.rhs;
    let u0 = problem.u0;
    let mut values = vec![u0];
    let mut fvals = vec![rhs.eval_unchecked(u0)];
    // w[j - 1] = weight(j)
    let mut w: Vec<f64> = Vec::new();
    let mut status = Termination::Completed;
    for n in 1..=grid.n_max {
        w.push(weight(n));
        let mut acc = 0.0;
        for (fm, wj) in fvals.iter().zip(w.iter().rev()) {
            acc += fm * wj;
        }
        let u = u0 + coef * acc;
        if let Some(stop) = check_value(rhs, u, n) {
            status = stop;
            break;
        }
        values.push(u);
        fvals.push(rhs.eval_unchecked(u));
    }
    Ok(Trajectory::finish(
        grid.k,
        problem.gamma,
        grid.scheme,
        values,
        status,
    ))
}

/// Shared driver of the L1 schemes. With `δ_j = u^j − u^{j−1}` the scheme reads
/// `u^{n+1} − c·F = S_n`, where `c = Γ(2−γ) k^γ` and
/// `S_n = u^n − Σ_{m=1}^{n} d_m δ_{n+1−m}` is a convex combination of the past.
struct L1Stepper {
    c: f64,
    a: f64,
    d: Vec<f64>,
    deltas: Vec<f64>,
}

impl L1Stepper {
    fn new(problem: &ProblemSpec, k: f64) -> Self {
        let g = problem.gamma.get();
        Self {
            c: gamma_positive(2.0 - g) * k.powf(g),
            a: 1.0 - g,
            d: vec![1.0],
            // deltas[j - 1] = δ_j
            deltas: Vec::new(),
        }
    }

    /// `S_n` given `u^n`.
    fn memory(&mut self, un: f64) -> f64 {
        let n = self.deltas.len();
        if self.d.len() <= n {
            self.d.push(l1_increment(self.a, n));
        }
        let mut acc = 0.0;
        for (dm, delta) in self.d[1..=n].iter().zip(self.deltas.iter().rev()) {
            acc += dm * delta;
        }
        un - acc
    }

    fn push(&mut self, un: f64, next: f64) {
        self.deltas.push(next - un);
    }
}

/// Explicit L1 scheme `(D_h^γ u)_{n+1} = f(u^n)`.
pub fn solve_diff_explicit(problem: &ProblemSpec, grid: &GridConfig) -> Result<Trajectory> {
    expect_scheme(grid, Scheme::DiffExplicit)?;
    grid.validate(problem)?;
    let rhs = &problem.rhs;
    let mut st = L1Stepper::new(problem, grid.k);
    let mut values = vec![problem.u0];
    let mut status = Termination::Completed;
    for n in 0..grid.n_max {
        let un = values[n];
        let s = st.memory(un);
        let next = s + st.c * rhs.eval_unchecked(un);
        if let Some(stop) = check_value(rhs, next, n + 1) {
            status = stop;
            break;
        }
        st.push(un, next);
        values.push(next);
    }
    Ok(Trajectory::finish(
        grid.k,
        problem.gamma,
        grid.scheme,
        values,
        status,
    ))
}

/// Implicit L1 scheme `(D_h^γ u)_{n+1} = f(u^{n+1})`.
///
/// Each step solves `z − c f(z) = S_n` on the admissible range where
/// `1 − c f'(z) ≥ 0`. A step without an admissible root ends the run with
/// [`Termination::BlowupBreak`].
pub fn solve_diff_implicit(problem: &ProblemSpec, grid: &GridConfig) -> Result<Trajectory> {
    expect_scheme(grid, Scheme::DiffImplicit)?;
    grid.validate(problem)?;
    let rhs = &problem.rhs;
    if !rhs.has_derivative() {
        return Err(Error::Unsupported(
            "the implicit scheme needs f' to locate the admissible range".into(),
        ));
    }
    let mut st = L1Stepper::new(problem, grid.k);
    let solver = ImplicitSolver::new(rhs, st.c);
    let mut values = vec![problem.u0];
    let mut status = Termination::Completed;
    for n in 0..grid.n_max {
        let un = values[n];
        let s = st.memory(un);
        match solver.solve(s, n + 1)? {
            StepOutcome::Root(z) => {
                if let Some(stop) = check_value(rhs, z, n + 1) {
                    status = stop;
                    break;
                }
                st.push(un, z);
                values.push(z);
            }
            StepOutcome::Stop(stop) => {
                status = stop;
                break;
            }
        }
    }
    Ok(Trajectory::finish(
        grid.k,
        problem.gamma,
        grid.scheme,
        values,
        status,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum StepOutcome {
    Root(f64),
    Stop(Termination),
}

/// Root finder for `g(z) = z − c f(z) − S = 0`.
struct ImplicitSolver<'a> {
    rhs: &'a RhsModel,
    c: f64,
    /// Analytic end of the admissible range `1 − c f' ≥ 0`, when known.
    cap: Option<f64>,
}

impl<'a> ImplicitSolver<'a> {
    fn new(rhs: &'a RhsModel, c: f64) -> Self {
        let cap = match rhs.kind() {
            RhsKind::PowerLaw { a, p } if *a > 0.0 && *p > 1.0 => {
                Some((1.0 / (p * a * c)).powf(1.0 / (p - 1.0)))
            }
            RhsKind::PowerLaw { .. } => Some(f64::INFINITY),
            RhsKind::General { .. } => None,
        };
        Self { rhs, c, cap }
    }

    fn solve(&self, s: f64, step: usize) -> Result<StepOutcome> {
        let broke = StepOutcome::Stop(Termination::BlowupBreak { n_star: step - 1 });
        if !s.is_finite() {
            return Ok(StepOutcome::Stop(Termination::Overflow { step }));
        }
        if !self.rhs.in_domain(s) {
            return Ok(StepOutcome::Stop(Termination::DomainExit { step }));
        }
        if let RhsKind::PowerLaw { a, p } = *self.rhs.kind() {
            let c = self.c;
            if a == 0.0 {
                return Ok(StepOutcome::Root(s));
            }
            if p == 0.0 {
                return Ok(StepOutcome::Root(s + c * a));
            }
            if p == 1.0 {
                let denom = 1.0 - c * a;
                return Ok(if denom > 0.0 {
                    StepOutcome::Root(s / denom)
                } else {
                    broke
                });
            }
            if p == 2.0 {
                // c A z² − z + S = 0, smaller root written without cancellation.
                let disc = 1.0 - 4.0 * c * a * s;
                return Ok(if disc < 0.0 {
                    broke
                } else {
                    StepOutcome::Root(2.0 * s / (1.0 + disc.sqrt()))
                });
            }
        }
        let fs = self.rhs.eval_unchecked(s);
        if fs == 0.0 {
            Ok(StepOutcome::Root(s))
        } else if fs > 0.0 {
            self.solve_above(s, fs, step)
        } else {
            self.solve_below(s, fs, step)
        }
    }

    fn residual(&self, z: f64, s: f64) -> f64 {
        z - self.c * self.rhs.eval_unchecked(z) - s
    }

    fn admissible(&self, z: f64) -> bool {
        match self.cap {
            Some(m) => z <= m,
            None => match self.rhs.eval_derivative(z) {
                Ok(fp) => 1.0 - self.c * fp >= 0.0,
                Err(_) => false,
            },
        }
    }

    /// End of the admissible range inside `(lo, hi]`, with `lo` admissible.
    fn cap_between(&self, mut lo: f64, mut hi: f64) -> f64 {
        if let Some(m) = self.cap {
            return m.min(hi);
        }
        for _ in 0..BISECTION_MAX_ITER {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.admissible(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// `g(S) < 0`: march upwards through the admissible range until `g ≥ 0`.
    fn solve_above(&self, s: f64, fs: f64, step: usize) -> Result<StepOutcome> {
        let broke = StepOutcome::Stop(Termination::BlowupBreak { n_star: step - 1 });
        if !self.admissible(s) {
            return Ok(broke);
        }
        let (_, dom_hi) = self.rhs.domain();
        let mut lo = s;
        let mut width = (self.c * fs).max(f64::EPSILON * s.abs().max(f64::MIN_POSITIVE));
        for _ in 0..BRACKET_MAX_EXPANSIONS {
            let mut hi = s + width;
            if !hi.is_finite() || hi >= dom_hi {
                return Ok(broke);
            }
            let mut at_cap = false;
            if !self.admissible(hi) {
                hi = self.cap_between(lo, hi);
                at_cap = true;
            }
            let g_hi = self.residual(hi, s);
            if g_hi >= 0.0 {
                return self.bisect(lo, hi, s, step).map(StepOutcome::Root);
            }
            if at_cap || !g_hi.is_finite() {
                return Ok(broke);
            }
            lo = hi;
            width *= 2.0;
        }
        Ok(broke)
    }

    /// `g(S) > 0`: march downwards towards the domain's lower end.
    fn solve_below(&self, s: f64, fs: f64, step: usize) -> Result<StepOutcome> {
        let (dom_lo, _) = self.rhs.domain();
        let mut hi = s;
        let mut width = -self.c * fs;
        for _ in 0..BRACKET_MAX_EXPANSIONS {
            let mut lo = s - width;
            if !(lo > dom_lo) {
                // approach the boundary geometrically
                lo = if dom_lo.is_finite() {
                    0.5 * (dom_lo + hi)
                } else {
                    return Ok(exit(step));
                };
                if !(lo > dom_lo) || lo >= hi {
                    return Ok(exit(step));
                }
            }
            let g_lo = self.residual(lo, s);
            if g_lo <= 0.0 {
                return self.bisect(lo, hi, s, step).map(StepOutcome::Root);
            }
            hi = lo;
            width *= 2.0;
        }
        return Ok(exit(step));

        fn exit(step: usize) -> StepOutcome {
            StepOutcome::Stop(Termination::DomainExit { step })
        }
    }

    /// Bisection on a bracket with `g(lo) ≤ 0 ≤ g(hi)`.
    fn bisect(&self, mut lo: f64, mut hi: f64, s: f64, step: usize) -> Result<f64> {
        for _ in 0..BISECTION_MAX_ITER {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= 1e-12 * mid.abs().max(1.0) || mid <= lo || mid >= hi {
                return Ok(mid);
            }
            if self.residual(mid, s) <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Err(Error::Numerical(format!(
            "implicit step {step}: bisection on [{lo}, {hi}] did not converge"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::{gamma_fn, mittag_leffler};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn order(g: f64) -> MlOrder {
        MlOrder::new(g).unwrap()
    }

    fn run(problem: &ProblemSpec, k: f64, scheme: Scheme) -> Trajectory {
        let grid = GridConfig::for_horizon(k, problem.horizon, scheme).unwrap();
        solve(problem, &grid).unwrap()
    }

    #[test]
    fn weights_examples() {
        let w = l1_weights(order(0.5), 20);
        assert!((w.b()[0] - 2.0 / std::f64::consts::PI.sqrt()).abs() < 1e-15);
        let b1 = (2f64.sqrt() - 2.0) / gamma_fn(1.5).unwrap();
        assert!((w.b()[1] - b1).abs() < 1e-15);
        assert!((w.b()[1] + 0.6609892125852943).abs() < 1e-15);
    }

    #[test]
    fn weights_series_branch_matches_direct() {
        for g in [0.1, 0.5, 0.9] {
            let a = 1.0 - g;
            for m in 9..40 {
                let mf = m as f64;
                let direct = (mf + 1.0).powf(a) - 2.0 * mf.powf(a) + (mf - 1.0).powf(a);
                let series = l1_second_difference(a, m);
                assert!(((series - direct) / direct).abs() < 1e-11, "g={g} m={m}");
            }
        }
    }

    #[test]
    fn weights_tail_identity() {
        for g in [0.05, 0.3, 0.6, 0.95, 1.0] {
            let w = l1_weights(order(g), 2000);
            assert!((w.b()[0] * gamma_fn(2.0 - g).unwrap() - 1.0).abs() < 1e-14);
            for n in 1..=2000 {
                assert!(w.b()[n] <= 0.0);
                if g < 1.0 {
                    assert!(w.b()[n] < 0.0, "g={g} n={n}");
                }
                let r = w.b()[n] + w.b_tail(n + 1) - w.b_tail(n);
                assert!(r.abs() < 1e-14, "g={g} n={n} r={r}");
            }
        }
    }

    #[test]
    fn caputo_of_constant_vanishes() {
        let w = l1_weights(order(0.4), 500);
        let vals = vec![3.7; 502];
        for n in [0, 1, 10, 500] {
            assert!(apply_discrete_caputo(&vals, &w, n, 0.01).unwrap().abs() < 1e-13);
        }
        assert!(matches!(
            apply_discrete_caputo(&vals[..5], &w, 4, 0.01),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn caputo_of_linear_is_exact() {
        let (g, k, n) = (0.5, 0.1, 3);
        let w = l1_weights(order(g), n);
        let vals: Vec<f64> = (0..=n + 1).map(|m| m as f64 * k).collect();
        let t = (n + 1) as f64 * k;
        let exact = t.powf(1.0 - g) / gamma_fn(2.0 - g).unwrap();
        let got = apply_discrete_caputo(&vals, &w, n, k).unwrap();
        assert!((got - exact).abs() < 1e-12);
    }

    #[test]
    fn caputo_of_mittag_leffler() {
        let (g, k, n) = (0.5, 1e-3, 999);
        let o = order(g);
        let w = l1_weights(o, n);
        let vals: Vec<f64> = (0..=n + 1)
            .map(|m| mittag_leffler(o, (m as f64 * k).powf(g)).unwrap())
            .collect();
        let got = apply_discrete_caputo(&vals, &w, n, k).unwrap();
        let scale = vals[n + 1];
        assert!((got - vals[n + 1]).abs() <= 3.0 * k.powf(2.0 - g) * scale);
    }

    #[test]
    fn zero_rhs_is_constant_for_every_scheme() {
        let p = ProblemSpec::power_law(0.5, 0.0, 2.0, 0.7, 1.0).unwrap();
        for sc in Scheme::ALL {
            let tr = run(&p, 0.01, sc);
            assert_eq!(tr.status, Termination::Completed);
            assert_eq!(tr.len(), 101);
            assert!(tr.values.iter().all(|&u| u == 0.7), "{sc}");
        }
    }

    #[test]
    fn product_scheme_exact_for_constant_rhs() {
        let p = ProblemSpec::power_law(0.5, 1.0, 0.0, 1.0, 1.0).unwrap();
        let tr = run(&p, 0.01, Scheme::IntegralProduct);
        let g15 = gamma_fn(1.5).unwrap();
        for (n, u) in tr.values.iter().enumerate() {
            let t = n as f64 * 0.01;
            assert!((u - (1.0 + t.sqrt() / g15)).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn rectangle_first_step() {
        let p = ProblemSpec::power_law(0.5, 1.0, 2.0, 1.0, 1.0).unwrap();
        let grid = GridConfig::new(0.01, 1, Scheme::IntegralRectangle).unwrap();
        let tr = solve(&p, &grid).unwrap();
        let expect = 1.0 + 0.1 / std::f64::consts::PI.sqrt();
        assert!((tr.values[1] - expect).abs() < 1e-15);
        assert!((tr.values[1] - 1.05642).abs() < 1e-5);
    }

    #[test]
    fn implicit_quadratic_root_matches_closed_form() {
        let (g, k, a) = (0.6, 1e-3, 1.0);
        let p = ProblemSpec::power_law(g, a, 2.0, 1.2, 1.0).unwrap();
        let grid = GridConfig::new(k, 1, Scheme::DiffImplicit).unwrap();
        let tr = solve(&p, &grid).unwrap();
        let b0 = 1.0 / gamma_fn(2.0 - g).unwrap();
        let kg = k.powf(g);
        let rhs = b0 * 1.2;
        let z = (b0 - (b0 * b0 - 4.0 * a * kg * rhs).sqrt()) / (2.0 * a * kg);
        assert!((tr.values[1] - z).abs() < 1e-13);
    }

    #[test]
    fn implicit_breaks_for_quadratic_growth() {
        let p = ProblemSpec::power_law(0.6, 1.0, 2.0, 1.2, 2.0).unwrap();
        let tr = run(&p, 1e-3, Scheme::DiffImplicit);
        let Termination::BlowupBreak { n_star } = tr.status else {
            panic!("expected a break, got {:?}", tr.status);
        };
        assert_eq!(n_star, tr.len() - 1);
        assert_eq!(tr.numerical_blowup_time, Some(n_star as f64 * 1e-3));
    }

    #[test]
    fn general_rhs_matches_power_law_path() {
        // same f through the bracketing solver
        let f = RhsModel::general(
            "u^2",
            Arc::new(|u: f64| u * u),
            Some(Arc::new(|u: f64| 2.0 * u)),
            true,
            true,
        )
        .with_domain(0.0, f64::INFINITY)
        .unwrap();
        let pg = ProblemSpec::new(order(0.6), 1.2, f, 2.0).unwrap();
        let pp = ProblemSpec::power_law(0.6, 1.0, 2.0, 1.2, 2.0).unwrap();
        let a = run(&pg, 2e-3, Scheme::DiffImplicit);
        let b = run(&pp, 2e-3, Scheme::DiffImplicit);
        assert_eq!(a.status, b.status);
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() <= 1e-10 * y.abs(), "{x} vs {y}");
        }
    }

    #[test]
    fn general_cubic_uses_bisection() {
        let pc = ProblemSpec::power_law(0.5, 1.0, 3.0, 1.0, 1.0).unwrap();
        let tr = run(&pc, 1e-3, Scheme::DiffImplicit);
        assert!(tr.broke_up());
        assert!(tr.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn implicit_requires_derivative() {
        let f = RhsModel::general("u^2", Arc::new(|u: f64| u * u), None, true, true);
        let p = ProblemSpec::new(order(0.5), 1.0, f, 1.0).unwrap();
        let grid = GridConfig::for_horizon(0.1, 1.0, Scheme::DiffImplicit).unwrap();
        assert!(matches!(solve(&p, &grid), Err(Error::Unsupported(_))));
    }

    #[test]
    fn decaying_problem_stays_positive() {
        let p = ProblemSpec::power_law(0.5, -1.0, 2.0, 1.0, 5.0).unwrap();
        for sc in [Scheme::DiffImplicit, Scheme::IntegralProduct] {
            let tr = run(&p, 1e-2, sc);
            assert_eq!(tr.status, Termination::Completed, "{sc}");
            assert!(tr.values.iter().all(|&u| u > 0.0 && u <= 1.0));
        }
    }

    #[test]
    fn domain_exit_is_recorded() {
        // A < 0 with p = 0 reaches zero in finite time
        let p = ProblemSpec::power_law(0.5, -1.0, 0.0, 0.1, 1.0).unwrap();
        for sc in Scheme::ALL {
            let tr = run(&p, 1e-3, sc);
            assert!(
                matches!(tr.status, Termination::DomainExit { .. }),
                "{sc}: {:?}",
                tr.status
            );
            assert!(tr.values.iter().all(|&u| u > 0.0));
        }
    }

    #[test]
    fn grid_validation() {
        let p = ProblemSpec::power_law(0.5, 1.0, 2.0, 1.0, 1.0).unwrap();
        let grid = GridConfig::new(0.1, 12, Scheme::DiffExplicit).unwrap();
        assert!(matches!(solve(&p, &grid), Err(Error::Argument(_))));
        let grid = GridConfig::new(0.1, 11, Scheme::DiffExplicit).unwrap();
        assert!(solve(&p, &grid).is_ok());
        assert!(GridConfig::new(0.0, 1, Scheme::DiffExplicit).is_err());
        assert_eq!(
            GridConfig::for_horizon(0.1, 1.0, Scheme::DiffExplicit)
                .unwrap()
                .n_max,
            10
        );
        let grid = GridConfig::new(0.01, 10, Scheme::DiffExplicit).unwrap();
        assert!(matches!(
            solve_diff_implicit(&p, &grid),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn memory_guard() {
        let p = ProblemSpec::power_law(0.5, 1.0, 2.0, 1.0, 1.0).unwrap();
        let grid = GridConfig::new(1e-9, 1_000_000_000, Scheme::DiffExplicit).unwrap();
        assert!(matches!(grid.validate(&p), Err(Error::Argument(_))));
    }

    #[test]
    fn scheme_names_round_trip() {
        for sc in Scheme::ALL {
            assert_eq!(sc.as_str().parse::<Scheme>().unwrap(), sc);
        }
        assert!("rk4".parse::<Scheme>().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn weights_invariants(g in 0.01f64..1.0, n in 1usize..3000) {
            let w = l1_weights(order(g), n);
            prop_assert!((w.b()[0] * gamma_fn(2.0 - g).unwrap() - 1.0).abs() < 1e-14);
            prop_assert!(w.b()[1..].iter().all(|&b| b < 0.0));
            let r = w.b()[n] + w.b_tail(n + 1) - w.b_tail(n);
            prop_assert!(r.abs() < 1e-14);
            // row n+1 of the b-form sums to zero
            let row: f64 = w.b()[..=n].iter().sum::<f64>() + w.b_tail(n + 1);
            prop_assert!(row.abs() < 1e-12);
        }

        #[test]
        fn constants_are_annihilated(g in 0.01f64..1.0, c in -1e3f64..1e3, n in 0usize..400, k in 1e-4f64..1.0) {
            let w = l1_weights(order(g), n);
            let vals = vec![c; n + 2];
            prop_assert!(apply_discrete_caputo(&vals, &w, n, k).unwrap().abs() < 1e-13);
        }

        #[test]
        fn schemes_are_monotone_for_growing_rhs(
            g in 0.1f64..1.0, a in 0.0f64..2.0, p in 0.0f64..2.5, u0 in 0.05f64..1.5,
        ) {
            let prob = ProblemSpec::power_law(g, a, p, u0, 0.5).unwrap();
            for sc in Scheme::ALL {
                let tr = run(&prob, 5e-3, sc);
                prop_assert_eq!(tr.values[0], u0);
                for w in tr.values.windows(2) {
                    prop_assert!(w[1] >= w[0] * (1.0 - 1e-14), "{} {:?}", sc, w);
                }
            }
        }

        #[test]
        fn break_time_is_n_star_k(g in 0.3f64..1.0, u0 in 0.5f64..3.0) {
            let prob = ProblemSpec::power_law(g, 1.0, 2.0, u0, 10.0).unwrap();
            let tr = run(&prob, 2e-3, Scheme::DiffImplicit);
            if let Termination::BlowupBreak { n_star } = tr.status {
                prop_assert_eq!(tr.numerical_blowup_time, Some(n_star as f64 * 2e-3));
                prop_assert_eq!(n_star + 1, tr.len());
            } else {
                prop_assert!(tr.numerical_blowup_time.is_none());
            }
        }
    }
}
