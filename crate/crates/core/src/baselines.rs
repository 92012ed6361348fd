//! Competing tests: the standardized sum of squared correlations (SC), the
//! centered maximum (J), the L₄ norm of sample covariances (LX), and the
//! min-p combination of SC and J (F).

use serde::{Deserialize, Serialize};

use crate::corr::{covariance_spectrum4, scaled_squared_correlations};
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::ltest::{bp, t_k, Calibration};
use crate::permutation::{perm_p_value, NullEnsemble, PValueMode, StatisticRequest};
use crate::scalar::Scalar;
use crate::special::{lambda_cdf, std_normal_sf, Probability};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaselineMethod {
    #[serde(rename = "SC")]
    Sc,
    #[serde(rename = "J")]
    J,
    #[serde(rename = "LX")]
    Lx,
    #[serde(rename = "F")]
    F,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineOutcome<S = f64> {
    pub method: BaselineMethod,
    pub statistic: S,
    pub p_value: Probability<S>,
    pub calibration: Calibration,
}

/// Ensemble key under which [`t_lx`] looks up its replicates.
pub fn lx_request<S>() -> StatisticRequest<S> {
    StatisticRequest::CovL4
}

/// `T_SC = (Σ n ρ̂²_ij − p*) / √(2p*(n−1)/(n+2))`, referred to `N(0, 1)`.
pub fn t_sc<S: Scalar>(data: &DataMatrix<S>) -> Result<BaselineOutcome<S>> {
    let total: S = scaled_squared_correlations(data).into_iter().sum();
    let statistic = sc_standardize(total, data.n(), data.p_star());
    Ok(BaselineOutcome {
        method: BaselineMethod::Sc,
        statistic,
        p_value: std_normal_sf(statistic),
        calibration: Calibration::Asymptotic,
    })
}

/// Standardizes the full sum `T_{p*}`.
pub fn sc_standardize<S: Scalar>(t_full: S, n: usize, p_star: usize) -> S {
    let (nf, ps) = (n as f64, p_star as f64);
    let scale = (2.0 * ps * (nf - 1.0) / (nf + 2.0)).sqrt();
    (t_full - S::lit(ps)) / S::lit(scale)
}

/// `T_J = max n ρ̂²_ij − 4 ln p + ln ln p`, referred to `Λ`.
pub fn t_j<S: Scalar>(data: &DataMatrix<S>) -> Result<BaselineOutcome<S>> {
    if data.p() < 3 {
        return Err(Error::domain("t_j", format!("need p >= 3, got {}", data.p())));
    }
    let statistic = t_k(data, 1)? - bp::<S>(data.p())?;
    Ok(BaselineOutcome {
        method: BaselineMethod::J,
        statistic,
        p_value: lambda_cdf(statistic).complement(),
        calibration: Calibration::Asymptotic,
    })
}

/// `T_LX = Σ_{i<j} σ̂⁴_ij`, calibrated against the `"lx"` series of `null`.
pub fn t_lx<S: Scalar>(
    data: &DataMatrix<S>,
    null: &NullEnsemble<S>,
    mode: PValueMode,
) -> Result<BaselineOutcome<S>> {
    let replicates = null.get(&lx_request::<S>().id())?;
    let statistic = covariance_spectrum4(data);
    Ok(BaselineOutcome {
        method: BaselineMethod::Lx,
        statistic,
        p_value: perm_p_value(statistic, replicates, mode)?,
        calibration: Calibration::Permutation,
    })
}

/// `T_F = min(p_SC, p_J)` with p-value `1 − (1 − T_F)²`, the law of the
/// minimum of two independent uniforms. The two p-values are asymptotically
/// independent under the null; the squared form is a modelling choice.
pub fn t_f<S: Scalar>(data: &DataMatrix<S>) -> Result<BaselineOutcome<S>> {
    let sc = t_sc(data)?;
    let j = t_j(data)?;
    Ok(f_from_p_values(sc.p_value, j.p_value))
}

pub fn f_from_p_values<S: Scalar>(p_sc: Probability<S>, p_j: Probability<S>) -> BaselineOutcome<S> {
    let m = p_sc.get().min(p_j.get());
    let q = S::one() - m;
    BaselineOutcome {
        method: BaselineMethod::F,
        statistic: m,
        p_value: Probability::saturating(S::one() - q * q),
        calibration: Calibration::Asymptotic,
    }
}
