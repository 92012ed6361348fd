//! Adaptive L-test: permutation p-values of `T_5` and of `T_⌈2^{-i}p*⌉`
//! over a dyadic grid, merged by Cauchy combination.

use serde::{Deserialize, Serialize};

use crate::data::{pair_count, DataMatrix, RngSpec};
use crate::error::{Error, Result};
use crate::permutation::{build_null, evaluate_requests, perm_p_value, NullEnsemble, PValueMode, StatisticRequest};
use crate::scalar::Scalar;
use crate::special::{cauchy_sf, Probability};

pub const DEFAULT_FIXED_K: usize = 5;
pub const DEFAULT_K_MIN: usize = 16;

/// What the dyadic fractions of the grid are fractions of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridBase {
    /// `⌈p*/2^i⌉`, the number of pairs.
    #[default]
    Pairs,
    /// `⌈p/2^i⌉`, the literal reading with the dimension itself.
    Dimension,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KGrid {
    pub fixed_k: usize,
    /// `2^{-i}` for dyadic grids; `k/p*` for explicit ones.
    pub gammas: Vec<f64>,
    /// Diverging components, strictly decreasing.
    pub ks: Vec<usize>,
}

impl KGrid {
    /// Dyadic grid `{⌈base/2^i⌉ : i ≥ 1}` cut off below `k_min`.
    pub fn dyadic(p: usize, fixed_k: usize, k_min: usize, base: GridBase) -> Result<Self> {
        if p < 3 {
            return Err(Error::InvalidGrid(format!("need p >= 3, got {p}")));
        }
        let p_star = pair_count(p);
        let total = match base {
            GridBase::Pairs => p_star,
            GridBase::Dimension => p,
        };
        let k_min = k_min.max(1);
        let mut gammas = Vec::new();
        let mut ks = Vec::new();
        for i in 1..usize::BITS {
            let k = total.div_ceil(1 << i);
            if k < k_min || ks.last() == Some(&k) {
                break;
            }
            gammas.push(0.5f64.powi(i as i32));
            ks.push(k);
        }
        if ks.is_empty() {
            return Err(Error::InvalidGrid(format!(
                "p={p} yields no grid value of at least {k_min}; pass an explicit k list"
            )));
        }
        Self::checked(p_star, fixed_k, gammas, ks)
    }

    /// Explicit diverging components, e.g. to reproduce non-dyadic rows.
    pub fn explicit(p: usize, fixed_k: usize, mut ks: Vec<usize>) -> Result<Self> {
        let p_star = pair_count(p);
        ks.sort_unstable_by(|a, b| b.cmp(a));
        if ks.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidGrid("duplicate k in grid".into()));
        }
        let gammas = ks.iter().map(|&k| k as f64 / p_star as f64).collect();
        Self::checked(p_star, fixed_k, gammas, ks)
    }

    fn checked(p_star: usize, fixed_k: usize, gammas: Vec<f64>, ks: Vec<usize>) -> Result<Self> {
        if ks.is_empty() {
            return Err(Error::InvalidGrid("grid has no diverging components".into()));
        }
        if fixed_k == 0 || fixed_k > p_star {
            return Err(Error::KOutOfRange { k: fixed_k, p_star });
        }
        if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > p_star) {
            return Err(Error::KOutOfRange { k, p_star });
        }
        if ks.last().is_some_and(|&min| fixed_k >= min) {
            return Err(Error::InvalidGrid(format!(
                "fixed k={fixed_k} must be below every grid value (smallest is {})",
                ks[ks.len() - 1]
            )));
        }
        Ok(KGrid { fixed_k, gammas, ks })
    }

    /// Number of diverging components `K`.
    pub fn len(&self) -> usize {
        self.ks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ks.is_empty()
    }

    /// `fixed_k` followed by the diverging components.
    pub fn all_ks(&self) -> Vec<usize> {
        std::iter::once(self.fixed_k).chain(self.ks.iter().copied()).collect()
    }

    pub fn requests<S>(&self) -> Vec<StatisticRequest<S>> {
        self.all_ks().into_iter().map(StatisticRequest::TopK).collect()
    }
}

/// `fixed_k = 5` plus `{⌈p*/2^i⌉ ≥ 16}`.
pub fn default_grid(p: usize) -> Result<KGrid> {
    KGrid::dyadic(p, DEFAULT_FIXED_K, DEFAULT_K_MIN, GridBase::Pairs)
}

/// Clips a permutation p-value to `[1/(2B), 1 − 1/(2B)]` so its Cauchy
/// transform stays finite.
pub fn clip_p_value<S: Scalar>(p: Probability<S>, b: usize) -> Probability<S> {
    let lo = S::lit(0.5 / b as f64);
    Probability::saturating(p.get().max(lo).min(S::one() - lo))
}

/// `tan((1/2 − p)π)`, via `cot(pπ)` in the tails where it is better conditioned.
fn cauchy_transform<S: Scalar>(p: S) -> S {
    let pi = S::PI();
    let quarter = S::lit(0.25);
    if p < quarter {
        (p * pi).tan().recip()
    } else if p > S::one() - quarter {
        -((S::one() - p) * pi).tan().recip()
    } else {
        ((S::lit(0.5) - p) * pi).tan()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CauchyCombination<S = f64> {
    pub t_c: S,
    pub p_c: Probability<S>,
}

/// Equal-weight Cauchy combination `T_C = m⁻¹ Σ tan((1/2 − p_i)π)`,
/// `p_C = 1 − G(T_C)`. Every `p_i` must lie strictly inside `(0, 1)`.
pub fn cauchy_combine<S: Scalar>(pvals: &[Probability<S>]) -> Result<CauchyCombination<S>> {
    if pvals.is_empty() {
        return Err(Error::domain("cauchy_combine", "no p-values to combine"));
    }
    if let Some(p) = pvals.iter().find(|p| !(p.get() > S::zero() && p.get() < S::one())) {
        return Err(Error::domain(
            "cauchy_combine",
            format!("p-value {} is not in (0, 1); clip it first", p.get()),
        ));
    }
    let sum: S = pvals.iter().map(|p| cauchy_transform(p.get())).sum();
    let t_c = sum / S::from_usize_lossy(pvals.len());
    Ok(CauchyCombination { t_c, p_c: cauchy_sf(t_c) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component<S = f64> {
    pub k: usize,
    pub statistic: S,
    pub p_value: Probability<S>,
    /// What entered the combination.
    pub clipped_p_value: Probability<S>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedOutcome<S = f64> {
    pub components: Vec<Component<S>>,
    pub t_c: S,
    pub p_c: Probability<S>,
}

/// Builds one ensemble for every grid component and combines.
pub fn adaptive_test<S: Scalar>(
    data: &DataMatrix<S>,
    grid: &KGrid,
    b: usize,
    seed: RngSpec,
) -> Result<CombinedOutcome<S>> {
    let null = build_null(data, &grid.requests(), b, seed)?;
    adaptive_test_with_null(data, grid, &null, PValueMode::Strict)
}

/// As [`adaptive_test`], against an ensemble that covers every grid component.
pub fn adaptive_test_with_null<S: Scalar>(
    data: &DataMatrix<S>,
    grid: &KGrid,
    null: &NullEnsemble<S>,
    mode: PValueMode,
) -> Result<CombinedOutcome<S>> {
    let requests = grid.requests::<S>();
    let observed = evaluate_requests(data, &requests)?;
    let components = requests
        .iter()
        .zip(grid.all_ks())
        .zip(observed)
        .map(|((req, k), statistic)| {
            let p_value = perm_p_value(statistic, null.get(&req.id())?, mode)?;
            Ok(Component {
                k,
                statistic,
                p_value,
                clipped_p_value: clip_p_value(p_value, null.b),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let clipped: Vec<_> = components.iter().map(|c| c.clipped_p_value).collect();
    let CauchyCombination { t_c, p_c } = cauchy_combine(&clipped)?;
    Ok(CombinedOutcome { components, t_c, p_c })
}
