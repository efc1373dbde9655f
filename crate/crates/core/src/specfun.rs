//! Gamma and Mittag-Leffler functions, and the resolvent kernel of `λ t^{γ-1}`.
//!
//! The one-parameter Mittag-Leffler function `E_γ(z) = Σ zⁿ / Γ(nγ + 1)` is
//! evaluated by three routes depending on the argument:
//!
//! * compensated Taylor summation for `z ≥ 0` and for small negative `z`;
//! * the leading algebraic asymptotic expansion for large negative `z`, used
//!   only when its truncation error is below double precision;
//! * otherwise, the completely monotone integral representation
//!   `E_γ(-x) = sin(γπ)/(γπ) ∫_0^∞ exp(-(xρ)^{1/γ}) / (ρ² + 2ρ cos γπ + 1) dρ`,
//!   whose integrand is positive, so no cancellation occurs.
//!
//! The derivative uses `E_γ'(z) = E_{γ,γ}(z) / γ`, evaluated the same way.

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::quad;

/// Order `γ ∈ (0, 1]` of a Mittag-Leffler function or Caputo derivative.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct MlOrder(f64);

impl MlOrder {
    pub fn new(gamma: f64) -> Result<Self> {
        if gamma.is_finite() && gamma > 0.0 && gamma <= 1.0 {
            Ok(Self(gamma))
        } else {
            domain(format!("order must lie in (0, 1], got {gamma}"))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    pub(crate) fn is_one(self) -> bool {
        self.0 == 1.0
    }
}

impl TryFrom<f64> for MlOrder {
    type Error = Error;

    fn try_from(gamma: f64) -> Result<Self> {
        Self::new(gamma)
    }
}

// Lanczos approximation, g = 7, n = 9 (coefficients as published with GSL).
const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

fn lanczos_sum(zm1: f64) -> f64 {
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (zm1 + i as f64);
    }
    acc
}

/// `sin(πx)` with argument reduction, exact zero at integers.
fn sin_pi(x: f64) -> f64 {
    if x == x.trunc() {
        return 0.0;
    }
    let r = x - 2.0 * (0.5 * x).round();
    // r ∈ [-1, 1]
    (PI * r).sin()
}

/// Γ(x) for `x > 0`.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return domain(format!(
            "gamma_fn requires a finite positive argument, got {x}"
        ));
    }
    let g = gamma_positive(x);
    if g.is_finite() {
        Ok(g)
    } else {
        Err(Error::Overflow(format!("Γ({x}) exceeds f64 range")))
    }
}

pub(crate) fn gamma_positive(x: f64) -> f64 {
    if x == x.trunc() && x <= 20.0 {
        return (1..x as u32).fold(1.0, |acc, i| acc * i as f64);
    }
    if x < 0.5 {
        return PI / (sin_pi(x) * gamma_positive(1.0 - x));
    }
    if x >= STIRLING_MIN {
        // √(2π) x^{x-1/2} e^{-x} e^{S(x)}, power split to delay overflow.
        let half = x.powf(0.5 * (x - 0.5));
        return (2.0 * PI).sqrt() * half * (half * (-x).exp()) * stirling_correction(x).exp();
    }
    let zm1 = x - 1.0;
    let t = zm1 + LANCZOS_G + 0.5;
    t.powf(zm1 + 0.5) * (-t).exp() * (2.0 * PI).sqrt() * lanczos_sum(zm1)
}

const STIRLING_MIN: f64 = 10.0;

/// `ln Γ(x) - [(x - 1/2) ln x - x + ln √(2π)]` for `x ≥ 10`.
fn stirling_correction(x: f64) -> f64 {
    const C: [f64; 8] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360_360.0,
        1.0 / 156.0,
        -3617.0 / 122_400.0,
    ];
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut acc = 0.0;
    for c in C.iter().rev() {
        acc = acc * inv2 + c;
    }
    acc * inv
}

/// ln Γ(x) for `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return domain(format!(
            "ln_gamma requires a finite positive argument, got {x}"
        ));
    }
    Ok(ln_gamma_positive(x))
}

pub(crate) fn ln_gamma_positive(x: f64) -> f64 {
    if x < STIRLING_MIN {
        return gamma_positive(x).ln();
    }
    LN_SQRT_2PI + (x - 0.5) * x.ln() - x + stirling_correction(x)
}

/// 1/Γ(x) for any real `x`, zero at the poles.
pub(crate) fn recip_gamma(x: f64) -> f64 {
    if x >= 0.5 {
        if x > 171.0 {
            return (-ln_gamma_positive(x)).exp();
        }
        return 1.0 / gamma_positive(x);
    }
    if x == x.trunc() {
        return 0.0;
    }
    // 1/Γ(x) = sin(πx) Γ(1-x) / π
    let g = gamma_positive(1.0 - x);
    if g.is_finite() {
        sin_pi(x) * g / PI
    } else {
        sin_pi(x).signum() * f64::INFINITY
    }
}

/// Neumaier-compensated running sum.
#[derive(Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Which second parameter of `E_{γ,β}` is being evaluated. Only `β = 1`
/// (the function itself) and `β = γ` (its derivative up to 1/γ) are needed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Beta {
    One,
    Order,
}

impl Beta {
    fn value(self, gamma: f64) -> f64 {
        match self {
            Beta::One => 1.0,
            Beta::Order => gamma,
        }
    }
}

const SERIES_NEG_LIMIT: f64 = 1.0;
const MAX_SERIES_TERMS: usize = 200_000;

fn ml_series(gamma: f64, beta: f64, z: f64) -> Result<f64> {
    if z == 0.0 {
        return Ok(recip_gamma(beta));
    }
    let ln_abs_z = z.abs().ln();
    let neg = z < 0.0;
    let mut acc = CompensatedSum::default();
    // Terms rise until n ≈ |z|^{1/γ}/γ, then fall.
    let peak = (z.abs().powf(1.0 / gamma) / gamma).ceil() as usize;
    for n in 0..MAX_SERIES_TERMS {
        let arg = gamma * n as f64 + beta;
        let ln_mag = n as f64 * ln_abs_z - ln_gamma_positive(arg);
        if ln_mag > 709.0 {
            return Err(Error::Overflow(format!(
                "Mittag-Leffler series term exceeds f64 range (γ={gamma}, z={z})"
            )));
        }
        let term = if arg < 150.0 && (n as f64) * ln_abs_z < 700.0 {
            z.powi(n as i32) / gamma_positive(arg)
        } else {
            let m = ln_mag.exp();
            if neg && n % 2 == 1 {
                -m
            } else {
                m
            }
        };
        acc.add(term);
        if n > peak + 2 && term.abs() <= 1e-17 * acc.value().abs() {
            let v = acc.value();
            return if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Overflow(format!(
                    "E_γ({z}) exceeds f64 range (γ={gamma})"
                )))
            };
        }
    }
    Err(Error::Numerical(format!(
        "Mittag-Leffler series did not converge (γ={gamma}, z={z})"
    )))
}

/// Algebraic expansion `E_{γ,β}(-x) ≈ Σ_{k≥1} (-1)^{k+1} x^{-k} / Γ(β - kγ)`,
/// returned only when the smallest retained term is negligible.
fn ml_neg_asymptotic(gamma: f64, beta: f64, x: f64) -> Option<f64> {
    let mut acc = CompensatedSum::default();
    let mut last_envelope = f64::INFINITY;
    let mut x_pow = 1.0;
    for k in 1..=80 {
        x_pow /= x;
        let arg = beta - k as f64 * gamma;
        // |1/Γ(arg)| ≤ Γ(1 - arg)/π left of 1/2; terms at poles vanish, so the
        // stopping rule watches this envelope instead of the term itself.
        let envelope = if arg < 0.5 {
            x_pow * gamma_positive(1.0 - arg) / PI
        } else {
            x_pow * recip_gamma(arg).abs()
        };
        if envelope > last_envelope && k > 3 {
            return None;
        }
        last_envelope = envelope;
        let term = x_pow * recip_gamma(arg);
        acc.add(if k % 2 == 1 { term } else { -term });
        if k > 2 && envelope <= 1e-17 * acc.value().abs() {
            return Some(acc.value());
        }
    }
    None
}

/// Positive-integrand representation for `E_{γ,β}(-x)`, `x > 0`, `γ < 1`.
fn ml_neg_integral(gamma: f64, beta: Beta, x: f64) -> Result<f64> {
    let inv = 1.0 / gamma;
    let (sin_g, cos_g) = (PI * gamma).sin_cos();
    let denom = |s: f64| {
        let rho = s / x;
        (rho + cos_g) * (rho + cos_g) + sin_g * sin_g
    };
    let integrand = |s: f64| -> f64 {
        let e = s.powf(inv);
        let w = (-e).exp();
        if w == 0.0 {
            return 0.0;
        }
        match beta {
            Beta::One => w / denom(s),
            Beta::Order => e * w / denom(s),
        }
    };
    // Mass of exp(-s^{1/γ}) is gone by s^{1/γ} ≈ 745.
    let s_cut = 745f64.powf(gamma);
    let peak = (-x * cos_g).max(0.0);
    let mut breaks = vec![0.0];
    let near = 40f64.powf(gamma).min(s_cut);
    for b in [near, peak] {
        if b > 0.0 && b < s_cut {
            breaks.push(b);
        }
    }
    breaks.sort_by(|a, b| a.total_cmp(b));
    breaks.dedup();
    let mut total = CompensatedSum::default();
    let mut ok = true;
    let mut scale = 0.0;
    for w in breaks.windows(2) {
        let r = quad::tanh_sinh(integrand, w[0], w[1], 1e-14, 1e-17 * scale);
        ok &= r.converged;
        total.add(r.value);
        scale = total.value().abs();
    }
    let r = quad::exp_sinh(integrand, *breaks.last().unwrap(), 1e-14, 1e-17 * scale);
    ok &= r.converged;
    total.add(r.value);
    if !ok {
        return Err(Error::Numerical(format!(
            "Mittag-Leffler integral did not converge (γ={gamma}, x={x})"
        )));
    }
    let prefactor = sin_g / (PI * gamma);
    Ok(match beta {
        Beta::One => prefactor * total.value() / x,
        Beta::Order => prefactor * total.value() / (x * x),
    })
}

fn ml_general(order: MlOrder, beta: Beta, z: f64) -> Result<f64> {
    if !z.is_finite() {
        return domain(format!("Mittag-Leffler argument must be finite, got {z}"));
    }
    let gamma = order.get();
    if order.is_one() {
        let v = z.exp();
        return if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Overflow(format!("exp({z}) exceeds f64 range")))
        };
    }
    let b = beta.value(gamma);
    if z >= -SERIES_NEG_LIMIT {
        return ml_series(gamma, b, z);
    }
    let x = -z;
    if x.powf(1.0 / gamma) > 40.0 {
        if let Some(v) = ml_neg_asymptotic(gamma, b, x) {
            return Ok(v);
        }
    }
    ml_neg_integral(gamma, beta, x)
}

/// `E_γ(z) = Σ zⁿ / Γ(nγ + 1)`.
///
/// Large positive arguments return [`Error::Overflow`] rather than `inf`.
pub fn mittag_leffler(order: MlOrder, z: f64) -> Result<f64> {
    ml_general(order, Beta::One, z)
}

/// `d/dz E_γ(z)`, computed as `E_{γ,γ}(z) / γ`.
pub fn mittag_leffler_derivative(order: MlOrder, z: f64) -> Result<f64> {
    Ok(ml_general(order, Beta::Order, z)? / order.get())
}

/// Resolvent `r_λ(t) = -d/dt E_γ(-λ Γ(γ) t^γ)` of the kernel `λ t^{γ-1}`.
///
/// Evaluated as `c t^{γ-1} E_{γ,γ}(-c t^γ)` with `c = λΓ(γ)`.
pub fn resolvent(order: MlOrder, lambda: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return domain(format!("resolvent requires t > 0, got {t}"));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return domain(format!("resolvent requires λ > 0, got {lambda}"));
    }
    let gamma = order.get();
    let c = lambda * gamma_positive(gamma);
    let x = c * t.powf(gamma);
    let e = ml_general(order, Beta::Order, -x)?;
    Ok(c * t.powf(gamma - 1.0) * e)
}
