//! Special functions and the handful of distribution laws the tests need.
//!
//! Everything here is evaluated natively in the scalar type `S`. The
//! accuracy targets quoted in the docs (around 1e-12 absolute) hold for
//! `f64`; `f32` evaluation follows the same code path at single precision.
//!
//! * Regularized incomplete beta `I_x(a, b)`: modified Lentz continued
//!   fraction, switching to `1 - I_{1-x}(b, a)` past `x = (a+1)/(a+b+2)`.
//!   The `x^a (1-x)^b / B(a,b)` prefactor is assembled from Stirling
//!   corrections when the shape parameters are large so that the big
//!   log-gamma terms cancel analytically rather than numerically.
//! * Regularized incomplete gamma `P(a, x)`, `Q(a, x)`: power series below
//!   `x = a + 1`, Lentz continued fraction above.
//! * Quantiles: bracketing bisection down to a relative width of 1e-8, then
//!   at most five Newton steps on the density, clamped to the bracket.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAX_ITER: usize = 10_000;
const NEWTON_STEPS: usize = 5;
const BISECTION_WIDTH: f64 = 1e-8;

/// A value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Probability<S = f64>(S);

impl<S: Scalar> Probability<S> {
    pub fn new(value: S) -> Result<Self> {
        if value.is_nan() || value < S::zero() || value > S::one() {
            return Err(Error::domain(
                "Probability::new",
                format!("{value} is not in [0, 1]"),
            ));
        }
        Ok(Probability(value))
    }

    /// Clamps rounding spill-over (e.g. `1 + 1e-17`) back into `[0, 1]`.
    pub(crate) fn saturating(value: S) -> Self {
        debug_assert!(!value.is_nan(), "probability is NaN");
        Probability(value.max(S::zero()).min(S::one()))
    }

    pub fn zero() -> Self {
        Probability(S::zero())
    }

    pub fn one() -> Self {
        Probability(S::one())
    }

    #[inline]
    pub fn get(self) -> S {
        self.0
    }

    pub fn complement(self) -> Self {
        Probability(S::one() - self.0)
    }
}

/// Level and argument-axis tolerance for a quantile inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileRequest<S = f64> {
    level: S,
    tolerance: S,
}

impl<S: Scalar> QuantileRequest<S> {
    pub fn new(level: S, tolerance: S) -> Result<Self> {
        if !(level > S::zero() && level < S::one()) {
            return Err(Error::domain(
                "QuantileRequest::new",
                format!("level {level} is not in (0, 1)"),
            ));
        }
        if !(tolerance > S::zero()) {
            return Err(Error::domain(
                "QuantileRequest::new",
                format!("tolerance {tolerance} must be positive"),
            ));
        }
        Ok(QuantileRequest { level, tolerance })
    }

    pub fn level(&self) -> S {
        self.level
    }

    pub fn tolerance(&self) -> S {
        self.tolerance
    }
}

fn tiny<S: Scalar>() -> S {
    S::min_positive_value() / S::epsilon()
}

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma<S: Scalar>(x: S) -> S {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < S::lit(0.5) {
        // reflection
        let pi = S::PI();
        return (pi / (pi * x).sin()).abs().ln() - ln_gamma(S::one() - x);
    }
    let x = x - S::one();
    let mut acc = S::lit(COEF[0]);
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc = acc + S::lit(c) / (x + S::from_usize_lossy(i));
    }
    let t = x + S::lit(G + 0.5);
    S::lit(0.5) * (S::lit(2.0) * S::PI()).ln() + (x + S::lit(0.5)) * t.ln() - t + acc.ln()
}

/// Remainder of Stirling's series, `ln Γ(a) - [(a - 1/2) ln a - a + ln √(2π)]`.
/// Accurate to below 1e-15 for `a >= 10`.
fn stirling_tail<S: Scalar>(a: S) -> S {
    let r = S::one() / a;
    let r2 = r * r;
    r * (S::lit(1.0 / 12.0)
        - r2 * (S::lit(1.0 / 360.0)
            - r2 * (S::lit(1.0 / 1260.0)
                - r2 * (S::lit(1.0 / 1680.0) - r2 * S::lit(1.0 / 1188.0)))))
}

const STIRLING_MIN: f64 = 10.0;

/// `ln Γ(b) - ln Γ(a + b)`, stable for large `b`.
fn ln_gamma_ratio<S: Scalar>(a: S, b: S) -> S {
    if b >= S::lit(STIRLING_MIN) && a + b >= S::lit(STIRLING_MIN) {
        let ab = a + b;
        -(b - S::lit(0.5)) * (a / b).ln_1p() - a * ab.ln() + a + stirling_tail(b)
            - stirling_tail(ab)
    } else {
        ln_gamma(b) - ln_gamma(a + b)
    }
}

/// `ln B(a, b)`.
pub fn ln_beta<S: Scalar>(a: S, b: S) -> S {
    let (small, large) = if a <= b { (a, b) } else { (b, a) };
    ln_gamma(small) + ln_gamma_ratio(small, large)
}

/// `ln[x^a (1-x)^b / B(a, b)]`.
fn ln_beta_prefactor<S: Scalar>(a: S, b: S, x: S) -> S {
    let lim = S::lit(STIRLING_MIN);
    if a >= lim && b >= lim {
        let ab = a + b;
        let x0 = a / ab;
        let y0 = b / ab;
        let half = S::lit(0.5);
        a * ((x - x0) / x0).ln_1p() + b * ((x0 - x) / y0).ln_1p() + half * (a * b / ab).ln()
            - half * (S::lit(2.0) * S::PI()).ln()
            - (stirling_tail(a) + stirling_tail(b) - stirling_tail(ab))
    } else {
        a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b)
    }
}

/// Continued fraction for `I_x(a, b)` (modified Lentz).
fn beta_cf<S: Scalar>(a: S, b: S, x: S) -> Result<S> {
    let one = S::one();
    let eps = S::epsilon();
    let fpmin = tiny::<S>();
    let qab = a + b;
    let qap = a + one;
    let qam = a - one;
    let mut c = one;
    let mut d = one - qab * x / qap;
    if d.abs() < fpmin {
        d = fpmin;
    }
    d = one / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = S::from_usize_lossy(m);
        let m2 = m + m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = one + aa * d;
        if d.abs() < fpmin {
            d = fpmin;
        }
        c = one + aa / c;
        if c.abs() < fpmin {
            c = fpmin;
        }
        d = one / d;
        h = h * d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = one + aa * d;
        if d.abs() < fpmin {
            d = fpmin;
        }
        c = one + aa / c;
        if c.abs() < fpmin {
            c = fpmin;
        }
        d = one / d;
        let del = d * c;
        h = h * del;
        if (del - one).abs() <= eps {
            return Ok(h);
        }
    }
    Err(Error::NoConvergence {
        func: "reg_inc_beta",
        iterations: MAX_ITER,
    })
}

fn check_beta_args<S: Scalar>(func: &'static str, a: S, b: S, x: S) -> Result<()> {
    if !(a > S::zero()) || !(b > S::zero()) {
        return Err(Error::domain(func, format!("shape parameters a={a}, b={b} must be positive")));
    }
    if !(x >= S::zero() && x <= S::one()) {
        return Err(Error::domain(func, format!("x={x} is not in [0, 1]")));
    }
    Ok(())
}

/// Returns `(I_x(a,b), 1 - I_x(a,b))`, each computed without cancellation.
fn inc_beta_pair<S: Scalar>(a: S, b: S, x: S) -> Result<(S, S)> {
    check_beta_args("reg_inc_beta", a, b, x)?;
    if x == S::zero() {
        return Ok((S::zero(), S::one()));
    }
    if x == S::one() {
        return Ok((S::one(), S::zero()));
    }
    if x < (a + S::one()) / (a + b + S::lit(2.0)) {
        let lower = ln_beta_prefactor(a, b, x).exp() * beta_cf(a, b, x)? / a;
        Ok((lower, S::one() - lower))
    } else {
        let y = S::one() - x;
        let upper = ln_beta_prefactor(b, a, y).exp() * beta_cf(b, a, y)? / b;
        Ok((S::one() - upper, upper))
    }
}

/// Regularized incomplete beta `I_x(a, b)`, the CDF of `Beta(a, b)` at `x`.
pub fn reg_inc_beta<S: Scalar>(a: S, b: S, x: S) -> Result<Probability<S>> {
    inc_beta_pair(a, b, x).map(|(lo, _)| Probability::saturating(lo))
}

/// Upper tail `1 - I_x(a, b)` without cancellation.
pub fn beta_sf<S: Scalar>(a: S, b: S, x: S) -> Result<Probability<S>> {
    inc_beta_pair(a, b, x).map(|(_, hi)| Probability::saturating(hi))
}

pub fn beta_pdf<S: Scalar>(a: S, b: S, x: S) -> Result<S> {
    check_beta_args("beta_pdf", a, b, x)?;
    if x == S::zero() || x == S::one() {
        let edge_shape = if x == S::zero() { a } else { b };
        return Ok(if edge_shape < S::one() {
            S::infinity()
        } else if edge_shape == S::one() {
            (-ln_beta(a, b)).exp()
        } else {
            S::zero()
        });
    }
    Ok(((a - S::one()) * x.ln() + (b - S::one()) * (-x).ln_1p() - ln_beta(a, b)).exp())
}

/// Returns `(P(a,x), Q(a,x))`.
fn inc_gamma_pair<S: Scalar>(a: S, x: S) -> Result<(S, S)> {
    if !(a > S::zero()) {
        return Err(Error::domain("reg_inc_gamma", format!("shape a={a} must be positive")));
    }
    if !(x >= S::zero()) {
        return Err(Error::domain("reg_inc_gamma", format!("x={x} must be nonnegative")));
    }
    if x == S::zero() {
        return Ok((S::zero(), S::one()));
    }
    if x.is_infinite() {
        return Ok((S::one(), S::zero()));
    }
    let one = S::one();
    let eps = S::epsilon();
    let log_front = -x + a * x.ln() - ln_gamma(a);
    if x < a + one {
        let mut ap = a;
        let mut del = one / a;
        let mut sum = del;
        for _ in 0..MAX_ITER {
            ap = ap + one;
            del = del * x / ap;
            sum = sum + del;
            if del.abs() < sum.abs() * eps {
                let p = sum * log_front.exp();
                return Ok((p, one - p));
            }
        }
    } else {
        let fpmin = tiny::<S>();
        let mut b = x + one - a;
        let mut c = one / fpmin;
        let mut d = one / b;
        let mut h = d;
        for i in 1..=MAX_ITER {
            let i = S::from_usize_lossy(i);
            let an = -i * (i - a);
            b = b + S::lit(2.0);
            d = an * d + b;
            if d.abs() < fpmin {
                d = fpmin;
            }
            c = b + an / c;
            if c.abs() < fpmin {
                c = fpmin;
            }
            d = one / d;
            let del = d * c;
            h = h * del;
            if (del - one).abs() <= eps {
                let q = log_front.exp() * h;
                return Ok((one - q, q));
            }
        }
    }
    Err(Error::NoConvergence {
        func: "reg_inc_gamma",
        iterations: MAX_ITER,
    })
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn reg_lower_gamma<S: Scalar>(a: S, x: S) -> Result<Probability<S>> {
    inc_gamma_pair(a, x).map(|(p, _)| Probability::saturating(p))
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 - P(a, x)`.
pub fn reg_upper_gamma<S: Scalar>(a: S, x: S) -> Result<Probability<S>> {
    inc_gamma_pair(a, x).map(|(_, q)| Probability::saturating(q))
}

fn check_chisq_args<S: Scalar>(func: &'static str, d: u32, x: S) -> Result<()> {
    if d < 1 {
        return Err(Error::domain(func, "degrees of freedom must be at least 1"));
    }
    if !(x >= S::zero()) {
        return Err(Error::domain(func, format!("x={x} must be nonnegative")));
    }
    Ok(())
}

/// CDF of the chi-square law with `d` degrees of freedom.
pub fn chisq_cdf<S: Scalar>(d: u32, x: S) -> Result<Probability<S>> {
    check_chisq_args("chisq_cdf", d, x)?;
    reg_lower_gamma(S::lit(f64::from(d) / 2.0), x / S::lit(2.0))
}

/// `1 - F_{χ²_d}(x)`.
pub fn chisq_sf<S: Scalar>(d: u32, x: S) -> Result<Probability<S>> {
    check_chisq_args("chisq_sf", d, x)?;
    reg_upper_gamma(S::lit(f64::from(d) / 2.0), x / S::lit(2.0))
}

pub fn chisq_pdf<S: Scalar>(d: u32, x: S) -> Result<S> {
    check_chisq_args("chisq_pdf", d, x)?;
    let k = S::lit(f64::from(d) / 2.0);
    let two = S::lit(2.0);
    if x == S::zero() {
        return Ok(match d {
            1 => S::infinity(),
            2 => S::lit(0.5),
            _ => S::zero(),
        });
    }
    Ok(((k - S::one()) * (x / two).ln() - x / two - ln_gamma(k)).exp() / two)
}

/// Inverts a continuous CDF on `[lo, hi]`: bisection to a narrow bracket,
/// then Newton steps clamped to the bracket.
fn invert_cdf<S, F, D>(
    func: &'static str,
    cdf: F,
    pdf: D,
    mut lo: S,
    mut hi: S,
    req: QuantileRequest<S>,
) -> Result<S>
where
    S: Scalar,
    F: Fn(S) -> Result<S>,
    D: Fn(S) -> Result<S>,
{
    let level = req.level();
    let width = S::lit(BISECTION_WIDTH).max(S::epsilon() * S::lit(8.0));
    let mut iterations = 0;
    while hi - lo > width * hi.abs() {
        let mid = lo + (hi - lo) / S::lit(2.0);
        if cdf(mid)? < level {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
        if iterations > 2_000 {
            return Err(Error::NoConvergence { func, iterations });
        }
    }
    let mut x = lo + (hi - lo) / S::lit(2.0);
    for _ in 0..NEWTON_STEPS {
        let density = pdf(x)?;
        if !(density > S::zero()) || !density.is_finite() {
            break;
        }
        let step = (cdf(x)? - level) / density;
        x = (x - step).max(lo).min(hi);
        if step.abs() <= req.tolerance() {
            break;
        }
    }
    Ok(x)
}

/// Quantile of `χ²_d` at `level`.
pub fn chisq_quantile<S: Scalar>(d: u32, level: S, tol: S) -> Result<S> {
    let req = QuantileRequest::new(level, tol)?;
    check_chisq_args("chisq_quantile", d, S::zero())?;
    let mut hi = S::lit(f64::from(d).max(1.0));
    let mut expansions = 0;
    while chisq_cdf(d, hi)?.get() < level {
        hi = hi * S::lit(2.0);
        expansions += 1;
        if expansions > 200 || hi.is_infinite() {
            return Err(Error::NoConvergence {
                func: "chisq_quantile",
                iterations: expansions,
            });
        }
    }
    invert_cdf(
        "chisq_quantile",
        |x| chisq_cdf(d, x).map(Probability::get),
        |x| chisq_pdf(d, x),
        S::zero(),
        hi,
        req,
    )
}

/// Quantile of `Beta(a, b)` at `level`.
pub fn beta_quantile<S: Scalar>(a: S, b: S, level: S, tol: S) -> Result<S> {
    let req = QuantileRequest::new(level, tol)?;
    check_beta_args("beta_quantile", a, b, S::zero())?;
    invert_cdf(
        "beta_quantile",
        |x| reg_inc_beta(a, b, x).map(Probability::get),
        |x| beta_pdf(a, b, x),
        S::zero(),
        S::one(),
        req,
    )
}

/// `log Λ⁻¹(x) = (8π)^{-1/2} e^{-x/2}`, the mean number of exceedances of `x`
/// in the limiting Poisson process of centered extreme squared correlations.
pub fn lambda_intensity<S: Scalar>(x: S) -> S {
    (S::lit(8.0) * S::PI()).sqrt().recip() * (-x / S::lit(2.0)).exp()
}

/// Type-I extreme-value CDF `Λ(x) = exp{-(8π)^{-1/2} e^{-x/2}}`.
pub fn lambda_cdf<S: Scalar>(x: S) -> Probability<S> {
    Probability::saturating((-lambda_intensity(x)).exp())
}

/// Inverse of [`lambda_cdf`].
pub fn lambda_quantile<S: Scalar>(level: S) -> Result<S> {
    if !(level > S::zero() && level < S::one()) {
        return Err(Error::domain("lambda_quantile", format!("level {level} is not in (0, 1)")));
    }
    Ok(-S::lit(2.0) * ((-level.ln()) * (S::lit(8.0) * S::PI()).sqrt()).ln())
}

/// Standard normal CDF via `Φ(x) = Q(1/2, x²/2) / 2` for `x < 0`.
pub fn std_normal_cdf<S: Scalar>(x: S) -> Probability<S> {
    if x.is_nan() {
        panic!("std_normal_cdf of NaN");
    }
    if x.is_infinite() {
        return if x > S::zero() { Probability::one() } else { Probability::zero() };
    }
    let half = S::lit(0.5);
    let (_, q) = inc_gamma_pair(half, x * x * half).expect("valid incomplete gamma arguments");
    let tail = half * q;
    Probability::saturating(if x < S::zero() { tail } else { S::one() - tail })
}

/// Standard normal upper tail `1 - Φ(x)`.
pub fn std_normal_sf<S: Scalar>(x: S) -> Probability<S> {
    std_normal_cdf(-x)
}

/// Standard Cauchy CDF `1/2 + arctan(x)/π`.
pub fn cauchy_cdf<S: Scalar>(x: S) -> Probability<S> {
    Probability::saturating(S::lit(0.5) + x.atan() / S::PI())
}

/// Standard Cauchy upper tail `1 - G(x)`, accurate for large `x`.
pub fn cauchy_sf<S: Scalar>(x: S) -> Probability<S> {
    if x > S::one() {
        Probability::saturating(x.recip().atan() / S::PI())
    } else {
        Probability::saturating(S::lit(0.5) - x.atan() / S::PI())
    }
}
