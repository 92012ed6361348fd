//! One entry point for every test the crate offers, used by the CLI and
//! the simulation lab.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::baselines::{f_from_p_values, t_j, t_lx, t_sc};
use crate::combine::{adaptive_test_with_null, default_grid, Component, KGrid};
use crate::data::{pair_count, DataMatrix, RngSpec};
use crate::error::{Error, Result};
use crate::ltest::{ceil_fraction, diverging_law, Calibration};
use crate::permutation::{build_null, evaluate_requests, perm_p_value, NullEnsemble, PValueMode, StatisticRequest};
use crate::scalar::Scalar;
use crate::special::{std_normal_sf, Probability};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// `T_k`, permutation calibrated.
    TopK(usize),
    /// `T_⌈γp*⌉`, permutation calibrated; the normal limit is reported too.
    TopFraction(f64),
    /// Cauchy combination over a k-grid.
    Cauchy,
    Sc,
    J,
    Lx,
    F,
}

impl Method {
    /// Cauchy combination plus every baseline.
    pub fn default_test_set() -> Vec<Method> {
        vec![Method::Cauchy, Method::Sc, Method::J, Method::Lx, Method::F]
    }

    pub fn parse_list(text: &str) -> Result<Vec<Method>> {
        let methods = text
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<_>>>()?;
        if methods.is_empty() {
            return Err(Error::InvalidConfig("empty method list".into()));
        }
        Ok(methods)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::TopK(5) => f.write_str("t5"),
            Method::TopK(k) => write!(f, "tk={k}"),
            Method::TopFraction(g) => write!(f, "tgamma={g}"),
            Method::Cauchy => f.write_str("tc"),
            Method::Sc => f.write_str("sc"),
            Method::J => f.write_str("j"),
            Method::Lx => f.write_str("lx"),
            Method::F => f.write_str("f"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::InvalidConfig(format!("method {s:?}: {why}"));
        let method = match s.to_ascii_lowercase().as_str() {
            "t5" => Method::TopK(5),
            "tc" => Method::Cauchy,
            "sc" => Method::Sc,
            "j" => Method::J,
            "lx" => Method::Lx,
            "f" => Method::F,
            other => {
                if let Some(k) = other.strip_prefix("tk=") {
                    let k: usize = k.parse().map_err(|_| bad("k is not a positive integer"))?;
                    if k == 0 {
                        return Err(bad("k must be at least 1"));
                    }
                    Method::TopK(k)
                } else if let Some(g) = other.strip_prefix("tgamma=") {
                    let g: f64 = g.parse().map_err(|_| bad("gamma is not a number"))?;
                    if !(g > 0.0 && g <= 1.0) {
                        return Err(bad("gamma must be in (0, 1]"));
                    }
                    Method::TopFraction(g)
                } else {
                    return Err(bad("expected one of t5, tk=<int>, tgamma=<float>, tc, sc, j, lx, f"));
                }
            }
        };
        Ok(method)
    }
}

impl Serialize for Method {
    fn serialize<Se: Serializer>(&self, s: Se) -> std::result::Result<Se::Ok, Se::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult<S = f64> {
    pub method: Method,
    pub statistic: S,
    pub p_value: Probability<S>,
    pub calibration: Calibration,
    /// Normal-limit p-value of `T_⌈γp*⌉`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub asymptotic_p_value: Option<Probability<S>>,
    /// Per-k components of the Cauchy combination.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<Component<S>>>,
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    /// Permutation replicates.
    pub b: usize,
    pub seed: RngSpec,
    /// Grid for the Cauchy combination; the dyadic default when `None`.
    pub grid: Option<KGrid>,
    pub p_value_mode: PValueMode,
}

impl EvalOptions {
    pub fn new(b: usize, seed: RngSpec) -> Self {
        EvalOptions {
            b,
            seed,
            grid: None,
            p_value_mode: PValueMode::Strict,
        }
    }

    fn resolve_grid(&self, methods: &[Method], p: usize) -> Result<Option<KGrid>> {
        if !methods.contains(&Method::Cauchy) {
            return Ok(None);
        }
        match &self.grid {
            Some(g) => Ok(Some(g.clone())),
            None => default_grid(p).map(Some),
        }
    }
}

fn push_unique<S>(out: &mut Vec<StatisticRequest<S>>, req: StatisticRequest<S>) {
    if !out.iter().any(|r| r.id() == req.id()) {
        out.push(req);
    }
}

fn fraction_k(gamma: f64, p: usize) -> Result<usize> {
    ceil_fraction(gamma, pair_count(p))
}

/// Permutation statistics that `methods` need, deduplicated by id.
/// Fractions resolve to their `T_k` so they share series with the grid.
pub fn required_requests<S>(methods: &[Method], p: usize, grid: Option<&KGrid>) -> Result<Vec<StatisticRequest<S>>> {
    let mut out = Vec::new();
    for m in methods {
        match *m {
            Method::TopK(k) => push_unique(&mut out, StatisticRequest::TopK(k)),
            Method::TopFraction(g) => push_unique(&mut out, StatisticRequest::TopK(fraction_k(g, p)?)),
            Method::Lx => push_unique(&mut out, StatisticRequest::CovL4),
            Method::Cauchy => {
                let grid = grid.ok_or_else(|| Error::InvalidGrid("Cauchy combination needs a grid".into()))?;
                for req in grid.requests() {
                    push_unique(&mut out, req);
                }
            }
            Method::Sc | Method::J | Method::F => {}
        }
    }
    Ok(out)
}

/// Per-method results and the ensemble they were calibrated against.
pub type Evaluation<S> = (Vec<MethodResult<S>>, Option<NullEnsemble<S>>);

/// Runs `methods` on `data`, building one shared permutation ensemble.
pub fn evaluate_methods<S: Scalar>(
    data: &DataMatrix<S>,
    methods: &[Method],
    opts: &EvalOptions,
) -> Result<Evaluation<S>> {
    let grid = opts.resolve_grid(methods, data.p())?;
    let requests = required_requests(methods, data.p(), grid.as_ref())?;
    let null = if requests.is_empty() {
        None
    } else {
        Some(build_null(data, &requests, opts.b, opts.seed)?)
    };
    let results = evaluate_methods_with(data, methods, grid.as_ref(), null.as_ref(), opts.p_value_mode)?;
    Ok((results, null))
}

/// Runs `methods` against a prebuilt ensemble (needed whenever a
/// permutation-calibrated method is present).
pub fn evaluate_methods_with<S: Scalar>(
    data: &DataMatrix<S>,
    methods: &[Method],
    grid: Option<&KGrid>,
    null: Option<&NullEnsemble<S>>,
    mode: PValueMode,
) -> Result<Vec<MethodResult<S>>> {
    let need_null = || null.ok_or_else(|| Error::MissingStatistic("no permutation ensemble supplied".into()));
    let mut cache: HashMap<String, S> = HashMap::new();
    let mut observed = |req: StatisticRequest<S>| -> Result<S> {
        let id = req.id();
        if let Some(&v) = cache.get(&id) {
            return Ok(v);
        }
        let v = evaluate_requests(data, &[req])?[0];
        cache.insert(id, v);
        Ok(v)
    };
    let plain = |method, statistic, p_value, calibration| MethodResult {
        method,
        statistic,
        p_value,
        calibration,
        asymptotic_p_value: None,
        components: None,
    };

    methods
        .iter()
        .map(|&method| {
            Ok(match method {
                Method::TopK(k) => {
                    let req = StatisticRequest::TopK(k);
                    let reps = need_null()?.get(&req.id())?;
                    let t = observed(req)?;
                    plain(method, t, perm_p_value(t, reps, mode)?, Calibration::Permutation)
                }
                Method::TopFraction(g) => {
                    let req = StatisticRequest::TopK(fraction_k(g, data.p())?);
                    let reps = need_null()?.get(&req.id())?;
                    let t = observed(req)?;
                    let law = diverging_law::<S>(g, data.n(), data.p())?;
                    MethodResult {
                        asymptotic_p_value: Some(std_normal_sf(law.standardize(t))),
                        ..plain(method, t, perm_p_value(t, reps, mode)?, Calibration::Permutation)
                    }
                }
                Method::Cauchy => {
                    let grid = grid.ok_or_else(|| Error::InvalidGrid("Cauchy combination needs a grid".into()))?;
                    let out = adaptive_test_with_null(data, grid, need_null()?, mode)?;
                    MethodResult {
                        components: Some(out.components),
                        ..plain(method, out.t_c, out.p_c, Calibration::Permutation)
                    }
                }
                Method::Sc => {
                    let o = t_sc(data)?;
                    plain(method, o.statistic, o.p_value, o.calibration)
                }
                Method::J => {
                    let o = t_j(data)?;
                    plain(method, o.statistic, o.p_value, o.calibration)
                }
                Method::Lx => {
                    let o = t_lx(data, need_null()?, mode)?;
                    plain(method, o.statistic, o.p_value, o.calibration)
                }
                Method::F => {
                    let o = f_from_p_values(t_sc(data)?.p_value, t_j(data)?.p_value);
                    plain(method, o.statistic, o.p_value, o.calibration)
                }
            })
        })
        .collect()
}

/// Raw statistics oriented so that larger means stronger evidence against
/// independence. Only the Cauchy combination needs permutations here;
/// `T_F` enters as `−min(p_SC, p_J)`.
pub fn method_scores<S: Scalar>(data: &DataMatrix<S>, methods: &[Method], opts: &EvalOptions) -> Result<Vec<S>> {
    let grid = opts.resolve_grid(methods, data.p())?;
    let null = match &grid {
        Some(g) => Some(build_null(data, &g.requests(), opts.b, opts.seed)?),
        None => None,
    };
    methods
        .iter()
        .map(|&method| match method {
            Method::TopK(k) => Ok(evaluate_requests(data, &[StatisticRequest::TopK(k)])?[0]),
            Method::TopFraction(g) => {
                Ok(evaluate_requests(data, &[StatisticRequest::TopK(fraction_k(g, data.p())?)])?[0])
            }
            Method::Lx => Ok(evaluate_requests(data, &[StatisticRequest::CovL4])?[0]),
            Method::Cauchy => {
                let (g, n) = (grid.as_ref().expect("grid resolved"), null.as_ref().expect("null built"));
                Ok(adaptive_test_with_null(data, g, n, opts.p_value_mode)?.t_c)
            }
            Method::Sc => Ok(t_sc(data)?.statistic),
            Method::J => Ok(t_j(data)?.statistic),
            Method::F => Ok(-f_from_p_values(t_sc(data)?.p_value, t_j(data)?.p_value).statistic),
        })
        .collect()
}
