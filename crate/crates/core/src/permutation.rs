//! Permutation null distributions.
//!
//! Every replicate permutes each column of the data independently, which
//! destroys cross-column dependence while keeping every marginal sample
//! intact. All requested statistics are evaluated on the same permuted
//! matrix, and replicate `b` draws from stream `seed.child(b)`, so an
//! ensemble is bit-identical whatever the number of worker threads.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corr::{covariance_spectrum4, scaled_squared_correlations, CorrSpectrum, SpectrumMode};
use crate::data::{DataMatrix, RngSpec, RngStream};
use crate::error::{Error, Result};
use crate::ltest::ceil_fraction;
use crate::scalar::Scalar;
use crate::special::Probability;

type Evaluator<S> = Arc<dyn Fn(&DataMatrix<S>) -> Result<S> + Send + Sync>;

/// A statistic to be recomputed on every permuted replicate.
#[derive(Clone)]
pub enum StatisticRequest<S = f64> {
    /// `T_k`.
    TopK(usize),
    /// `T_⌈γp*⌉`.
    TopFraction(f64),
    /// `Σ_{i<j} σ̂_ij⁴`.
    CovL4,
    Custom { id: String, eval: Evaluator<S> },
}

impl<S> fmt::Debug for StatisticRequest<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl<S> StatisticRequest<S> {
    pub fn custom(
        id: impl Into<String>,
        eval: impl Fn(&DataMatrix<S>) -> Result<S> + Send + Sync + 'static,
    ) -> Self {
        StatisticRequest::Custom {
            id: id.into(),
            eval: Arc::new(eval),
        }
    }

    /// Stable identifier used as the key in a [`NullEnsemble`].
    pub fn id(&self) -> String {
        match self {
            StatisticRequest::TopK(k) => format!("tk={k}"),
            StatisticRequest::TopFraction(g) => format!("tgamma={g}"),
            StatisticRequest::CovL4 => "lx".to_string(),
            StatisticRequest::Custom { id, .. } => id.clone(),
        }
    }

    fn top_k(&self, p_star: usize) -> Result<Option<usize>> {
        let k = match self {
            StatisticRequest::TopK(k) => *k,
            StatisticRequest::TopFraction(g) => ceil_fraction(*g, p_star)?,
            _ => return Ok(None),
        };
        if k == 0 || k > p_star {
            return Err(Error::KOutOfRange { k, p_star });
        }
        Ok(Some(k))
    }
}

/// Evaluates all requests on one matrix, computing the correlation spectrum
/// at most once.
pub fn evaluate_requests<S: Scalar>(
    data: &DataMatrix<S>,
    requests: &[StatisticRequest<S>],
) -> Result<Vec<S>> {
    let p_star = data.p_star();
    let ks = requests
        .iter()
        .map(|r| r.top_k(p_star))
        .collect::<Result<Vec<_>>>()?;
    let prefix = match ks.iter().flatten().max() {
        Some(&max_k) => {
            let values = scaled_squared_correlations(data);
            CorrSpectrum::from_pair_values(data.n(), data.p(), &values, SpectrumMode::TopK(max_k))?
                .prefix_sums()
        }
        None => Vec::new(),
    };
    requests
        .iter()
        .zip(&ks)
        .map(|(req, k)| match (req, k) {
            (_, Some(k)) => Ok(prefix[k - 1]),
            (StatisticRequest::CovL4, None) => Ok(covariance_spectrum4(data)),
            (StatisticRequest::Custom { eval, .. }, None) => eval(data),
            _ => unreachable!("top-k requests always resolve a k"),
        })
        .collect()
}

/// Returns a copy of `data` with each column independently shuffled.
/// Columns consume the stream in order `1, …, p`.
pub fn permute_columns<S: Scalar>(data: &DataMatrix<S>, stream: &mut RngStream) -> DataMatrix<S> {
    let mut values = data.as_column_major().to_vec();
    for col in values.chunks_exact_mut(data.n()) {
        stream.shuffle(col);
    }
    DataMatrix::from_parts_unchecked(data.n(), data.p(), values, data.names().map(<[_]>::to_vec))
}

/// Replicate values of one statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullSeries<S = f64> {
    pub id: String,
    pub values: Vec<S>,
}

pub const ENSEMBLE_FORMAT: &str = "ltest.null_ensemble.v1";

/// `B` permutation replicates of one or more statistics.
///
/// JSON layout:
///
/// ```json
/// {
///   "format": "ltest.null_ensemble.v1",
///   "B": 400,
///   "seed": { "master_seed": 7, "stream_index": 0 },
///   "n": 100, "p": 20,
///   "data_fingerprint": "9f1c…",
///   "statistics": [ { "id": "tk=5", "values": [ … ] }, … ]
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullEnsemble<S = f64> {
    pub format: String,
    #[serde(rename = "B")]
    pub b: usize,
    pub seed: RngSpec,
    pub n: usize,
    pub p: usize,
    pub data_fingerprint: String,
    pub statistics: Vec<NullSeries<S>>,
}

impl<S: Scalar> NullEnsemble<S> {
    pub fn get(&self, id: &str) -> Result<&[S]> {
        self.statistics
            .iter()
            .find(|s| s.id == id)
            .map(|s| s.values.as_slice())
            .ok_or_else(|| Error::MissingStatistic(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.statistics.iter().any(|s| s.id == id)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ens: Self = serde_json::from_str(text)?;
        if ens.format != ENSEMBLE_FORMAT {
            return Err(Error::InvalidConfig(format!(
                "unsupported null ensemble format {:?}",
                ens.format
            )));
        }
        if let Some(s) = ens.statistics.iter().find(|s| s.values.len() != ens.b) {
            return Err(Error::InvalidConfig(format!(
                "statistic {} has {} replicates, expected {}",
                s.id,
                s.values.len(),
                ens.b
            )));
        }
        Ok(ens)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Whether this ensemble was built from `data` with `b` replicates and
    /// `seed`, and covers every id in `ids`.
    pub fn matches(&self, data: &DataMatrix<S>, b: usize, seed: RngSpec, ids: &[String]) -> bool {
        self.b == b
            && self.seed == seed
            && self.n == data.n()
            && self.p == data.p()
            && self.data_fingerprint == fingerprint(data)
            && ids.iter().all(|id| self.contains(id))
    }
}

/// FNV-1a over the bit patterns of the matrix entries, as 16 hex digits.
pub fn fingerprint<S: Scalar>(data: &DataMatrix<S>) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |x: u64| {
        for byte in x.to_le_bytes() {
            h ^= u64::from(byte);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    eat(data.n() as u64);
    eat(data.p() as u64);
    for v in data.as_column_major() {
        eat(v.as_f64().to_bits());
    }
    format!("{h:016x}")
}

/// Builds the permutation null for `requests` from `b` replicates.
pub fn build_null<S: Scalar>(
    data: &DataMatrix<S>,
    requests: &[StatisticRequest<S>],
    b: usize,
    seed: RngSpec,
) -> Result<NullEnsemble<S>> {
    if b == 0 {
        return Err(Error::InvalidConfig("B must be at least 1".into()));
    }
    let replicates: Vec<Vec<S>> = (0..b)
        .into_par_iter()
        .map(|rep| {
            let mut stream = seed.child(rep as u64).stream();
            let permuted = permute_columns(data, &mut stream);
            evaluate_requests(&permuted, requests)
        })
        .collect::<Result<_>>()?;
    let statistics = requests
        .iter()
        .enumerate()
        .map(|(i, req)| NullSeries {
            id: req.id(),
            values: replicates.iter().map(|row| row[i]).collect(),
        })
        .collect();
    Ok(NullEnsemble {
        format: ENSEMBLE_FORMAT.to_string(),
        b,
        seed,
        n: data.n(),
        p: data.p(),
        data_fingerprint: fingerprint(data),
        statistics,
    })
}

/// How replicate ties and the zero p-value are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMode {
    /// `#{b : T < T*_b} / B`. Can be exactly 0.
    #[default]
    Strict,
    /// `(1 + #{b : T*_b ≥ T}) / (B + 1)`. Never 0.
    Conservative,
}

/// Upper-tail permutation p-value of `observed` against `replicates`.
pub fn perm_p_value<S: Scalar>(
    observed: S,
    replicates: &[S],
    mode: PValueMode,
) -> Result<Probability<S>> {
    if replicates.is_empty() {
        return Err(Error::EmptyReplicates);
    }
    let b = replicates.len();
    let value = match mode {
        PValueMode::Strict => {
            let exceed = replicates.iter().filter(|&&t| observed < t).count();
            exceed as f64 / b as f64
        }
        PValueMode::Conservative => {
            let at_least = replicates.iter().filter(|&&t| t >= observed).count();
            (1 + at_least) as f64 / (b + 1) as f64
        }
    };
    Probability::new(S::lit(value))
}
