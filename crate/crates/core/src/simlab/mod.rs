//! Monte Carlo experiments: empirical size and size-corrected power.
//!
//! Seeds are derived hierarchically from the master seed: phase `0` holds
//! null replicates and phase `1 + m` the replicates with block size `m`.
//! Replicate `r` of a phase generates its data from `phase.child(r).child(0)`
//! and permutes from `phase.child(r).child(1)`. Every replicate is therefore
//! reproducible on its own, whatever the thread count or the order in which
//! block sizes are listed.

mod gen;
mod report;

pub use gen::{gen_data, sym_sqrt, AlternativeSpec, InnovationDist, Sampler, DEFAULT_T_DF, DEFAULT_THETA};
pub use report::{ExperimentReport, ReportRow};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combine::{GridBase, KGrid, DEFAULT_FIXED_K, DEFAULT_K_MIN};
use crate::data::RngSpec;
use crate::error::{Error, Result};
use crate::methods::{evaluate_methods, method_scores, EvalOptions, Method};
use crate::permutation::PValueMode;

/// A fully resolved experiment. Every field has a default so partial JSON
/// configs are accepted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub p: usize,
    pub dist: InnovationDist,
    pub methods: Vec<Method>,
    pub alphas: Vec<f64>,
    /// `R`: replicates for size, or alternative replicates per `m` for power.
    #[serde(rename = "R")]
    pub replicates: usize,
    /// `R₀`: null replicates for power critical values; `R` when absent.
    #[serde(rename = "R0")]
    pub null_replicates: Option<usize>,
    #[serde(rename = "B")]
    pub b: usize,
    pub seed: u64,
    /// Block sizes for power; values below 2 mean "no dependence".
    pub m: Vec<usize>,
    pub theta: f64,
    /// Explicit diverging `k` values for the Cauchy combination.
    pub k_list: Option<Vec<usize>>,
    pub grid_base: GridBase,
    pub p_value_mode: PValueMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: 100,
            p: 100,
            dist: InnovationDist::Gaussian,
            methods: vec![Method::TopK(5), Method::Cauchy, Method::Sc, Method::J, Method::Lx, Method::F],
            alphas: vec![0.05],
            replicates: 1000,
            null_replicates: None,
            b: 400,
            seed: 1,
            m: Vec::new(),
            theta: DEFAULT_THETA,
            k_list: None,
            grid_base: GridBase::Pairs,
            p_value_mode: PValueMode::Strict,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(Error::InvalidConfig(s));
        if self.n < 3 || self.p < 3 {
            return bad(format!("need n >= 3 and p >= 3, got n={}, p={}", self.n, self.p));
        }
        if self.replicates == 0 || self.null_replicates == Some(0) {
            return bad("replicate counts must be at least 1".into());
        }
        if self.b == 0 {
            return bad("B must be at least 1".into());
        }
        if self.methods.is_empty() {
            return bad("no methods selected".into());
        }
        if self.alphas.is_empty() {
            return bad("no alpha levels".into());
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return bad(format!("alpha={a} is not in (0, 1)"));
        }
        for &m in &self.m {
            if m > self.p {
                return bad(format!("block size m={m} exceeds p={}", self.p));
            }
            if m >= 2 {
                AlternativeSpec::new(m, self.theta)?;
            }
        }
        self.grid()?;
        Ok(())
    }

    /// The Cauchy grid, or `None` when no method needs one.
    pub fn grid(&self) -> Result<Option<KGrid>> {
        if !self.methods.contains(&Method::Cauchy) {
            return Ok(None);
        }
        let g = match &self.k_list {
            Some(ks) => KGrid::explicit(self.p, DEFAULT_FIXED_K, ks.clone())?,
            None => KGrid::dyadic(self.p, DEFAULT_FIXED_K, DEFAULT_K_MIN, self.grid_base)?,
        };
        Ok(Some(g))
    }

    pub fn r0(&self) -> usize {
        self.null_replicates.unwrap_or(self.replicates)
    }

    fn eval_options(&self, seed: RngSpec) -> Result<EvalOptions> {
        Ok(EvalOptions {
            b: self.b,
            seed,
            grid: self.grid()?,
            p_value_mode: self.p_value_mode,
        })
    }

    fn alternative(&self, m: usize) -> Result<Option<AlternativeSpec>> {
        if m < 2 {
            Ok(None)
        } else {
            AlternativeSpec::new(m, self.theta).map(Some)
        }
    }
}

fn phase_seed(seed: u64, m: Option<usize>) -> RngSpec {
    RngSpec::new(seed, 0).child(m.map_or(0, |m| 1 + m as u64))
}

/// Evaluates `f` on each replicate's (data, permutation seed), in parallel,
/// returning results in replicate order.
fn replicate<T: Send>(
    cfg: &ExperimentConfig,
    m: Option<usize>,
    count: usize,
    f: impl Fn(&crate::data::DataMatrix<f64>, RngSpec) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let phase = phase_seed(cfg.seed, m);
    let alt = cfg.alternative(m.unwrap_or(0))?;
    (0..count)
        .into_par_iter()
        .map(|r| {
            let rep = phase.child(r as u64);
            let data = gen_data(cfg.n, cfg.p, cfg.dist, alt.as_ref(), &mut rep.child(0).stream())?;
            f(&data, rep.child(1))
        })
        .collect()
}

/// Rejection rates at each `α` over `R` null replicates, with binomial
/// standard errors `√(α(1−α)/R)`.
pub fn empirical_size(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let pvals: Vec<Vec<f64>> = replicate(cfg, None, cfg.replicates, |data, seed| {
        let (res, _) = evaluate_methods(data, &cfg.methods, &cfg.eval_options(seed)?)?;
        Ok(res.into_iter().map(|r| r.p_value.get()).collect())
    })?;
    let r = cfg.replicates as f64;
    let mut rows = Vec::new();
    for (i, method) in cfg.methods.iter().enumerate() {
        for &alpha in &cfg.alphas {
            let hits = pvals.iter().filter(|row| row[i] <= alpha).count();
            rows.push(ReportRow {
                method: *method,
                n: cfg.n,
                p: cfg.p,
                dist: cfg.dist,
                m: None,
                s: None,
                alpha,
                estimate: hits as f64 / r,
                stderr: (alpha * (1.0 - alpha) / r).sqrt(),
            });
        }
    }
    Ok(ExperimentReport::new("size", cfg.clone(), rows))
}

/// Upper `α` critical value: the `⌈(1−α)R₀⌉`-th smallest null score.
pub fn critical_value(null_scores: &[f64], alpha: f64) -> f64 {
    let mut sorted = null_scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let idx = ((1.0 - alpha) * sorted.len() as f64).ceil() as usize;
    sorted[idx.clamp(1, sorted.len()) - 1]
}

/// Size-corrected power for every `m` in `cfg.m`: critical values come from
/// `R₀` null replicates of each raw score, power is the fraction of `R`
/// alternative replicates strictly above them.
pub fn size_corrected_power(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    if cfg.m.is_empty() {
        return Err(Error::InvalidConfig("power needs at least one block size m".into()));
    }
    let scores = |m: Option<usize>, count: usize| {
        replicate(cfg, m, count, |data, seed| method_scores(data, &cfg.methods, &cfg.eval_options(seed)?))
    };
    let null = scores(None, cfg.r0())?;
    let crit: Vec<Vec<f64>> = (0..cfg.methods.len())
        .map(|i| {
            let column: Vec<f64> = null.iter().map(|row| row[i]).collect();
            cfg.alphas.iter().map(|&a| critical_value(&column, a)).collect()
        })
        .collect();
    let r1 = cfg.replicates as f64;
    let mut rows = Vec::new();
    for &m in &cfg.m {
        let alt = scores(Some(m), cfg.replicates)?;
        for (i, method) in cfg.methods.iter().enumerate() {
            for (a, &alpha) in cfg.alphas.iter().enumerate() {
                let hits = alt.iter().filter(|row| row[i] > crit[i][a]).count();
                let power = hits as f64 / r1;
                rows.push(ReportRow {
                    method: *method,
                    n: cfg.n,
                    p: cfg.p,
                    dist: cfg.dist,
                    m: Some(m),
                    s: Some(m * m.saturating_sub(1) / 2),
                    alpha,
                    estimate: power,
                    stderr: (power * (1.0 - power) / r1).sqrt(),
                });
            }
        }
    }
    Ok(ExperimentReport::new("power", cfg.clone(), rows))
}
