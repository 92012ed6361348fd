//! L-statistics `T_k` (sums of the `k` largest `n·ρ̂²`) and their
//! asymptotic calibration.
//!
//! Two regimes are covered:
//!
//! * fixed `k`: the centered order statistics `n·ρ̂²_(p*+1-s) − b_p` have a
//!   Poisson-process limit with mean measure `log Λ⁻¹(x)`;
//! * `k = ⌈γ p*⌉`: `(T_k − μ_{γ,n,p}) / √p*` is asymptotically `N(0, σ²_γ)`,
//!   with `μ` built from the truncated Beta moments `A_{1,n}` and `σ²_γ`
//!   from their chi-square limits, `σ²_γ = A₂(v_γ) − A₁(v_γ)²`.
//!
//! Only `k = 1` gets an asymptotic p-value in the fixed regime; larger fixed
//! `k` are calibrated by permutation (see [`crate::permutation`]).

use serde::{Deserialize, Serialize};

use crate::corr::{spectrum, CorrSpectrum, SpectrumMode};
use crate::data::{pair_count, DataMatrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::special::{
    beta_quantile, beta_sf, chisq_quantile, chisq_sf, lambda_cdf, lambda_intensity,
    reg_upper_gamma, std_normal_sf, Probability,
};

const QUANTILE_TOL: f64 = 1e-12;

/// Where a p-value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Calibration {
    Asymptotic,
    Permutation,
}

/// A statistic with its p-value and how that p-value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome<S = f64> {
    pub statistic: S,
    pub p_value: Probability<S>,
    pub calibration: Calibration,
}

/// `T_k`: sum of the `k` largest values of `n·ρ̂²_ij`.
pub fn t_k<S: Scalar>(data: &DataMatrix<S>, k: usize) -> Result<S> {
    spectrum(data, SpectrumMode::TopK(k))?.top_sum(k)
}

/// `⌈γ p*⌉`, with products within 1e-9 (relative) of an integer snapped
/// to it so that e.g. `0.1 × 4950` does not round up to 496.
pub fn ceil_fraction(gamma: f64, p_star: usize) -> Result<usize> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::domain("ceil_fraction", format!("gamma={gamma} is not in (0, 1]")));
    }
    let x = gamma * p_star as f64;
    let nearest = x.round();
    let k = if (x - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        x.ceil()
    };
    Ok((k as usize).clamp(1, p_star.max(1)))
}

/// Centering `b_p = 4 log p − log log p`.
pub fn bp<S: Scalar>(p: usize) -> Result<S> {
    if p < 3 {
        return Err(Error::domain("bp", format!("p = {p} < 3 leaves log log p undefined or negative")));
    }
    let lp = S::from_usize_lossy(p).ln();
    Ok(S::lit(4.0) * lp - lp.ln())
}

/// Limit CDF of the `s`-th largest centered `n·ρ̂²`:
/// `Λ(x) Σ_{i<s} {log Λ⁻¹(x)}^i / i!`, the probability that a Poisson
/// variable with mean `log Λ⁻¹(x)` is below `s`.
pub fn sth_max_cdf<S: Scalar>(x: S, s: usize) -> Result<Probability<S>> {
    if s == 0 {
        return Err(Error::domain("sth_max_cdf", "order index s must be at least 1"));
    }
    let mu = lambda_intensity(x);
    if s > 30 {
        return reg_upper_gamma(S::from_usize_lossy(s), mu);
    }
    let mut term = S::one();
    let mut sum = S::one();
    for i in 1..s {
        term = term * mu / S::from_usize_lossy(i);
        sum = sum + term;
    }
    Ok(Probability::saturating(lambda_cdf(x).get() * sum))
}

/// Joint limit `P(M₁ ≤ x₁, M₂ ≤ x₂)` of the two largest centered values,
/// `Λ(x₂){1 + log Λ⁻¹(x₂) − log Λ⁻¹(x₁)}` for `x₁ ≥ x₂`.
pub fn joint_top2_cdf<S: Scalar>(x1: S, x2: S) -> Result<Probability<S>> {
    if !(x1 >= x2) {
        return Err(Error::domain("joint_top2_cdf", format!("need x1 >= x2, got {x1} < {x2}")));
    }
    let gap = lambda_intensity(x2) - lambda_intensity(x1);
    Ok(Probability::saturating(lambda_cdf(x2).get() * (S::one() + gap)))
}

/// The fixed-`k` limit law of the `s`-th largest `n·ρ̂²` in dimension `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedKLaw<S = f64> {
    pub p: usize,
    pub b_p: S,
    pub s: usize,
}

impl<S: Scalar> FixedKLaw<S> {
    pub fn new(p: usize, s: usize) -> Result<Self> {
        if s == 0 {
            return Err(Error::domain("FixedKLaw::new", "order index s must be at least 1"));
        }
        Ok(FixedKLaw { p, b_p: bp(p)?, s })
    }

    /// CDF of the centered value `n·ρ̂²_(p*+1-s) − b_p`.
    pub fn cdf(&self, centered: S) -> Probability<S> {
        sth_max_cdf(centered, self.s).expect("s validated at construction")
    }

    /// CDF of the raw `n·ρ̂²_(p*+1-s)`.
    pub fn cdf_raw(&self, value: S) -> Probability<S> {
        self.cdf(value - self.b_p)
    }
}

/// Asymptotic test from the largest squared correlation,
/// `p = 1 − Λ(T₁ − b_p)`. The reported statistic is the centered `T₁ − b_p`.
pub fn max_p_value<S: Scalar>(data: &DataMatrix<S>) -> Result<TestOutcome<S>> {
    let law = FixedKLaw::new(data.p(), 1)?;
    let centered = t_k(data, 1)? - law.b_p;
    Ok(TestOutcome {
        statistic: centered,
        p_value: law.cdf(centered).complement(),
        calibration: Calibration::Asymptotic,
    })
}

fn check_moment_order(func: &'static str, l: u32) -> Result<()> {
    if !(1..=4).contains(&l) {
        return Err(Error::domain(func, format!("order l={l} is not in 1..=4")));
    }
    Ok(())
}

fn binomial(l: u32, j: u32) -> f64 {
    (0..j).fold(1.0, |acc, i| acc * f64::from(l - i) / f64::from(i + 1))
}

/// `(2j − 1)!!`: `E Z^{2j}` for standard normal `Z`.
fn double_factorial_odd(j: u32) -> f64 {
    (1..=j).fold(1.0, |acc, i| acc * f64::from(2 * i - 1))
}

/// Truncated moment `A_{l,n}(x) = E[(nB − x)^l 1(nB ≥ x)]` with
/// `B ~ Beta(1/2, (n−2)/2)`, the exact null law of `ρ̂²` under Gaussian data.
///
/// Expanding `(nB − x)^l` binomially, each `E[(nB)^j 1(nB ≥ x)]` equals
/// `E(nB)^j` times the upper tail of `Beta(1/2 + j, (n−2)/2)` at `x/n`, which
/// yields the closed forms with `n/(n−1)`, `3n²/((n−1)(n+1))`, and so on.
pub fn moment_a<S: Scalar>(l: u32, n: usize, x: S) -> Result<S> {
    check_moment_order("moment_a", l)?;
    if n < 3 {
        return Err(Error::domain("moment_a", format!("n = {n} < 3")));
    }
    if !(x >= S::zero()) {
        return Err(Error::domain("moment_a", format!("x = {x} must be nonnegative")));
    }
    let n_s = S::from_usize_lossy(n);
    if x >= n_s {
        return Ok(S::zero());
    }
    let b = S::lit((n as f64 - 2.0) / 2.0);
    let t = x / n_s;
    let mut total = S::zero();
    // raw moment E(nB)^j = n^j Π_{i<j} (2i+1)/(n−1+2i)
    let mut raw_moment = S::one();
    for j in 0..=l {
        if j > 0 {
            let i = S::from_u32(j - 1).expect("small integer");
            raw_moment = raw_moment * n_s * (S::lit(2.0) * i + S::one())
                / (n_s - S::one() + S::lit(2.0) * i);
        }
        let tail = beta_sf(S::lit(0.5 + f64::from(j)), b, t)?.get();
        let coef = S::lit(binomial(l, j)) * (-x).powi((l - j) as i32);
        total = total + coef * raw_moment * tail;
    }
    Ok(total.max(S::zero()))
}

/// Chi-square limit `A_l(x) = lim_n A_{l,n}(x)`, e.g.
/// `A₁(x) = {1 − F_{χ²₃}(x)} − x{1 − F_{χ²₁}(x)}`.
pub fn moment_a_limit<S: Scalar>(l: u32, x: S) -> Result<S> {
    check_moment_order("moment_a_limit", l)?;
    if !(x >= S::zero()) {
        return Err(Error::domain("moment_a_limit", format!("x = {x} must be nonnegative")));
    }
    let mut total = S::zero();
    for j in 0..=l {
        let tail = chisq_sf(2 * j + 1, x)?.get();
        let coef = S::lit(binomial(l, j) * double_factorial_odd(j)) * (-x).powi((l - j) as i32);
        total = total + coef * tail;
    }
    Ok(total.max(S::zero()))
}

/// `A_{l,n}(x)` next to its limit `A_l(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentFunctions<S = f64> {
    pub order: u32,
    pub n: usize,
    pub x: S,
    pub finite: S,
    pub limit: S,
}

impl<S: Scalar> MomentFunctions<S> {
    pub fn evaluate(order: u32, n: usize, x: S) -> Result<Self> {
        Ok(MomentFunctions {
            order,
            n,
            x,
            finite: moment_a(order, n, x)?,
            limit: moment_a_limit(order, x)?,
        })
    }
}

/// Normal approximation for `T_⌈γp*⌉`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergingKLaw<S = f64> {
    pub gamma: f64,
    pub n: usize,
    pub p: usize,
    /// `⌈γ p*⌉`.
    pub k: usize,
    /// `(1−γ)` quantile of `n·Beta(1/2, (n−2)/2)`.
    pub v_gamma_n: S,
    /// `(1−γ)` quantile of `χ²₁`.
    pub v_gamma: S,
    /// `μ_{γ,n,p} = p*{A_{1,n}(v_{γ,n}) + γ v_{γ,n}}`.
    pub mu: S,
    /// `σ²_γ = A₂(v_γ) − A₁(v_γ)²`.
    pub sigma2: S,
}

pub fn diverging_law<S: Scalar>(gamma: f64, n: usize, p: usize) -> Result<DivergingKLaw<S>> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::domain("diverging_law", format!("gamma={gamma} is not in (0, 1]")));
    }
    if n < 3 || p < 2 {
        return Err(Error::domain("diverging_law", format!("need n >= 3 and p >= 2, got n={n}, p={p}")));
    }
    let p_star = pair_count(p);
    let tol = S::lit(QUANTILE_TOL);
    let (v_gamma_n, v_gamma) = if gamma == 1.0 {
        (S::zero(), S::zero())
    } else {
        let level = S::lit(1.0 - gamma);
        let b = S::lit((n as f64 - 2.0) / 2.0);
        (
            S::from_usize_lossy(n) * beta_quantile(S::lit(0.5), b, level, tol)?,
            chisq_quantile(1, level, tol)?,
        )
    };
    let a1 = moment_a_limit(1, v_gamma)?;
    let sigma2 = moment_a_limit(2, v_gamma)? - a1 * a1;
    let mu = S::from_usize_lossy(p_star) * (moment_a(1, n, v_gamma_n)? + S::lit(gamma) * v_gamma_n);
    Ok(DivergingKLaw {
        gamma,
        n,
        p,
        k: ceil_fraction(gamma, p_star)?,
        v_gamma_n,
        v_gamma,
        mu,
        sigma2,
    })
}

impl<S: Scalar> DivergingKLaw<S> {
    /// `(T − μ) / √(p* σ²_γ)`.
    pub fn standardize(&self, t: S) -> S {
        (t - self.mu) / (S::from_usize_lossy(pair_count(self.p)) * self.sigma2).sqrt()
    }
}

/// Asymptotic upper-tail p-value of `T_⌈γp*⌉` under the normal limit.
pub fn diverging_p_value<S: Scalar>(data: &DataMatrix<S>, gamma: f64) -> Result<TestOutcome<S>> {
    let law = diverging_law::<S>(gamma, data.n(), data.p())?;
    let statistic = t_k(data, law.k)?;
    Ok(TestOutcome {
        statistic,
        p_value: std_normal_sf(law.standardize(statistic)),
        calibration: Calibration::Asymptotic,
    })
}

/// `v̂_{γ,n,p}`: the `⌈γp*⌉`-th largest `n·ρ̂²`, an empirical `(1−γ)`
/// quantile that tracks `v_{γ,n}` at rate `1/p`.
pub fn empirical_threshold<S: Scalar>(spectrum: &CorrSpectrum<S>, gamma: f64) -> Result<S> {
    if spectrum.mode() != SpectrumMode::Full {
        return Err(Error::domain("empirical_threshold", "requires a full-mode spectrum"));
    }
    let k = ceil_fraction(gamma, spectrum.p_star())?;
    Ok(spectrum.values()[k - 1])
}
