//! Right-hand sides `f(u)` and initial-value problems `D_c^γ u = f(u)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{domain, Error, Result};
use crate::specfun::MlOrder;

/// Scalar function handle used by [`RhsModel::general`].
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum RhsKind {
    /// `f(u) = A u^p` on `(0, ∞)`.
    PowerLaw { a: f64, p: f64 },
    /// Caller-supplied `f` on the open interval `domain`, optionally with `f'`.
    General {
        f: ScalarFn,
        f_prime: Option<ScalarFn>,
        domain: (f64, f64),
        name: String,
    },
}

/// The nonlinearity `f(u)` together with the monotonicity and sign
/// hypotheses that the comparison results depend on.
#[derive(Clone)]
pub struct RhsModel {
    kind: RhsKind,
    is_nondecreasing: bool,
    is_nonnegative_on_domain: bool,
}

impl fmt::Debug for RhsModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            RhsKind::PowerLaw { a, p } => write!(f, "RhsModel::PowerLaw {{ A: {a}, p: {p} }}"),
            RhsKind::General { name, domain, .. } => {
                write!(f, "RhsModel::General {{ {name}, domain: {domain:?} }}")
            }
        }
    }
}

impl RhsModel {
    /// `f(u) = A u^p`. Monotonicity and sign are derived from `A` and `p`.
    pub fn power_law(a: f64, p: f64) -> Result<Self> {
        if !a.is_finite() || !p.is_finite() {
            return domain(format!("power law needs finite A and p, got A={a}, p={p}"));
        }
        // A u^p is nondecreasing on (0, ∞) iff A·p ≥ 0 (or A = 0).
        let is_nondecreasing = a == 0.0 || p == 0.0 || (a > 0.0) == (p > 0.0);
        Ok(Self {
            kind: RhsKind::PowerLaw { a, p },
            is_nondecreasing,
            is_nonnegative_on_domain: a >= 0.0,
        })
    }

    /// A general right-hand side. The flags are the caller's declaration; they
    /// are not verified here.
    pub fn general(
        name: impl Into<String>,
        f: ScalarFn,
        f_prime: Option<ScalarFn>,
        is_nondecreasing: bool,
        is_nonnegative_on_domain: bool,
    ) -> Self {
        Self {
            kind: RhsKind::General {
                f,
                f_prime,
                domain: (f64::NEG_INFINITY, f64::INFINITY),
                name: name.into(),
            },
            is_nondecreasing,
            is_nonnegative_on_domain,
        }
    }

    /// Restricts a general model to the open interval `(lo, hi)`.
    pub fn with_domain(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::Argument(format!("empty domain ({lo}, {hi})")));
        }
        match &mut self.kind {
            RhsKind::General { domain, .. } => *domain = (lo, hi),
            RhsKind::PowerLaw { .. } => {
                return Err(Error::Unsupported(
                    "power-law domain is fixed to (0, ∞)".into(),
                ))
            }
        }
        Ok(self)
    }

    pub fn kind(&self) -> &RhsKind {
        &self.kind
    }

    /// `(A, p)` for power-law models.
    pub fn power_law_params(&self) -> Option<(f64, f64)> {
        match self.kind {
            RhsKind::PowerLaw { a, p } => Some((a, p)),
            RhsKind::General { .. } => None,
        }
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.is_nondecreasing
    }

    pub fn is_nonnegative_on_domain(&self) -> bool {
        self.is_nonnegative_on_domain
    }

    pub fn has_derivative(&self) -> bool {
        match &self.kind {
            RhsKind::PowerLaw { .. } => true,
            RhsKind::General { f_prime, .. } => f_prime.is_some(),
        }
    }

    /// Open interval on which `f` is defined.
    pub fn domain(&self) -> (f64, f64) {
        match &self.kind {
            RhsKind::PowerLaw { .. } => (0.0, f64::INFINITY),
            RhsKind::General { domain, .. } => *domain,
        }
    }

    pub fn in_domain(&self, u: f64) -> bool {
        let (lo, hi) = self.domain();
        u.is_finite() && u > lo && u < hi
    }

    /// `f(u)`.
    pub fn eval(&self, u: f64) -> Result<f64> {
        if !self.in_domain(u) {
            let (lo, hi) = self.domain();
            return domain(format!("u = {u} outside rhs domain ({lo}, {hi})"));
        }
        Ok(self.eval_unchecked(u))
    }

    /// `f'(u)`.
    pub fn eval_derivative(&self, u: f64) -> Result<f64> {
        if !self.in_domain(u) {
            let (lo, hi) = self.domain();
            return domain(format!("u = {u} outside rhs domain ({lo}, {hi})"));
        }
        match &self.kind {
            RhsKind::PowerLaw { a, p } => Ok(power_law_derivative(*a, *p, u)),
            RhsKind::General {
                f_prime: Some(fp), ..
            } => Ok(fp(u)),
            RhsKind::General {
                f_prime: None,
                name,
                ..
            } => Err(Error::Unsupported(format!(
                "rhs '{name}' was built without a derivative"
            ))),
        }
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, u: f64) -> f64 {
        match &self.kind {
            RhsKind::PowerLaw { a, p } => power_law_value(*a, *p, u),
            RhsKind::General { f, .. } => f(u),
        }
    }
}

#[inline]
fn power_law_value(a: f64, p: f64, u: f64) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    if p == 0.0 {
        a
    } else if p == 1.0 {
        a * u
    } else if p == 2.0 {
        a * u * u
    } else {
        a * u.powf(p)
    }
}

#[inline]
fn power_law_derivative(a: f64, p: f64, u: f64) -> f64 {
    if a == 0.0 || p == 0.0 {
        0.0
    } else if p == 1.0 {
        a
    } else if p == 2.0 {
        2.0 * a * u
    } else {
        a * p * u.powf(p - 1.0)
    }
}

/// `f(u)`; free-function form of [`RhsModel::eval`].
pub fn eval_rhs(rhs: &RhsModel, u: f64) -> Result<f64> {
    rhs.eval(u)
}

/// `f'(u)`; free-function form of [`RhsModel::eval_derivative`].
pub fn eval_rhs_derivative(rhs: &RhsModel, u: f64) -> Result<f64> {
    rhs.eval_derivative(u)
}

/// One initial-value problem `D_c^γ u = f(u)`, `u(0) = u0`, on `[0, horizon]`.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub gamma: MlOrder,
    pub u0: f64,
    pub rhs: RhsModel,
    pub horizon: f64,
}

impl ProblemSpec {
    pub fn new(gamma: MlOrder, u0: f64, rhs: RhsModel, horizon: f64) -> Result<Self> {
        if !(u0 > 0.0) || !u0.is_finite() {
            return domain(format!("u0 must be finite and positive, got {u0}"));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return domain(format!(
                "horizon must be finite and positive, got {horizon}"
            ));
        }
        if !rhs.in_domain(u0) {
            return domain(format!("u0 = {u0} outside rhs domain {:?}", rhs.domain()));
        }
        Ok(Self {
            gamma,
            u0,
            rhs,
            horizon,
        })
    }

    /// Shorthand for `D_c^γ u = A u^p`.
    pub fn power_law(gamma: f64, a: f64, p: f64, u0: f64, horizon: f64) -> Result<Self> {
        Self::new(
            MlOrder::new(gamma)?,
            u0,
            RhsModel::power_law(a, p)?,
            horizon,
        )
    }

    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        Self::new(self.gamma, self.u0, self.rhs.clone(), horizon)
    }

    pub fn with_u0(&self, u0: f64) -> Result<Self> {
        Self::new(self.gamma, u0, self.rhs.clone(), self.horizon)
    }
}
