//! Pairwise sample correlations and the ordered spectrum of `n·ρ̂²`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::data::{pair_count, DataMatrix, PairIndex};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-column sample mean and centered Euclidean norm `‖X_·i − X̄_·i‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnStats<S = f64> {
    pub means: Vec<S>,
    pub centered_norms: Vec<S>,
}

impl<S: Scalar> ColumnStats<S> {
    pub fn compute(data: &DataMatrix<S>) -> Self {
        let centered = Centered::new(data);
        ColumnStats {
            means: centered.means,
            centered_norms: centered.sum_sq.iter().map(|v| v.sqrt()).collect(),
        }
    }
}

/// Centered columns (column-major) with their sums of squares. The sums of
/// squares go through the same [`dot`] as the cross products, so a column
/// paired with an exact copy of itself gives `ρ̂ = 1` with no rounding.
struct Centered<S> {
    n: usize,
    means: Vec<S>,
    values: Vec<S>,
    sum_sq: Vec<S>,
}

impl<S: Scalar> Centered<S> {
    fn new(data: &DataMatrix<S>) -> Self {
        let n = data.n();
        let n_s = S::from_usize_lossy(n);
        let mut means = Vec::with_capacity(data.p());
        let mut values = Vec::with_capacity(n * data.p());
        for col in data.columns() {
            let mean = col.iter().copied().sum::<S>() / n_s;
            means.push(mean);
            values.extend(col.iter().map(|&v| v - mean));
        }
        let sum_sq = values.chunks_exact(n).map(|c| dot(c, c)).collect();
        Centered {
            n,
            means,
            values,
            sum_sq,
        }
    }

    #[inline]
    fn column(&self, j: usize) -> &[S] {
        &self.values[j * self.n..(j + 1) * self.n]
    }

    #[inline]
    fn corr(&self, i: usize, j: usize) -> S {
        clamp_unit(dot(self.column(i), self.column(j)) / (self.sum_sq[i] * self.sum_sq[j]).sqrt())
    }
}

#[inline]
fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    let mut acc = [S::zero(); 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: S = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(&x, &y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        acc[0] = acc[0] + x[0] * y[0];
        acc[1] = acc[1] + x[1] * y[1];
        acc[2] = acc[2] + x[2] * y[2];
        acc[3] = acc[3] + x[3] * y[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn clamp_unit<S: Scalar>(r: S) -> S {
    r.max(-S::one()).min(S::one())
}

/// Pearson correlation of one variable pair, clamped to `[-1, 1]`.
pub fn correlation<S: Scalar>(data: &DataMatrix<S>, pair: PairIndex) -> Result<S> {
    if pair.j() > data.p() {
        return Err(Error::InvalidData(format!(
            "pair ({}, {}) exceeds p = {}",
            pair.i(),
            pair.j(),
            data.p()
        )));
    }
    Ok(Centered::new(data).corr(pair.i() - 1, pair.j() - 1))
}

const BLOCK: usize = 32;

/// `n·ρ̂²_ij` for every pair, in [`PairIndex`] enumeration order.
pub fn scaled_squared_correlations<S: Scalar>(data: &DataMatrix<S>) -> Vec<S> {
    let p = data.p();
    let centered = Centered::new(data);
    let scale = S::from_usize_lossy(data.n());
    let mut out = vec![S::zero(); pair_count(p)];
    // row i of the pair triangle starts at flat offset i(2p - i - 1)/2
    let row_start = |i: usize| i * (2 * p - i - 1) / 2;
    for ib in (0..p).step_by(BLOCK) {
        for jb in (ib..p).step_by(BLOCK) {
            for i in ib..(ib + BLOCK).min(p) {
                let base = row_start(i);
                for j in jb.max(i + 1)..(jb + BLOCK).min(p) {
                    let r = centered.corr(i, j);
                    out[base + (j - i - 1)] = scale * r * r;
                }
            }
        }
    }
    out
}

/// Whether a spectrum holds every pair or only the largest `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumMode {
    Full,
    TopK(usize),
}

/// `n·ρ̂²` values sorted in nonincreasing order, each tagged with the flat
/// index of its pair. Equal values are ordered by pair index.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrSpectrum<S = f64> {
    n: usize,
    p: usize,
    mode: SpectrumMode,
    values: Vec<S>,
    pairs: Vec<usize>,
}

impl<S: Scalar> CorrSpectrum<S> {
    /// Builds a spectrum from unsorted pair-ordered values.
    pub fn from_pair_values(n: usize, p: usize, values: &[S], mode: SpectrumMode) -> Result<Self> {
        let p_star = pair_count(p);
        assert_eq!(values.len(), p_star, "one value per pair");
        let k = match mode {
            SpectrumMode::Full => p_star,
            SpectrumMode::TopK(k) => {
                if k == 0 || k > p_star {
                    return Err(Error::KOutOfRange { k, p_star });
                }
                k
            }
        };
        let order = top_indices(values, k);
        Ok(CorrSpectrum {
            n,
            p,
            mode,
            values: order.iter().map(|&i| values[i]).collect(),
            pairs: order,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn p_star(&self) -> usize {
        pair_count(self.p)
    }

    pub fn mode(&self) -> SpectrumMode {
        self.mode
    }

    /// Values in nonincreasing order.
    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn pairs(&self) -> impl Iterator<Item = PairIndex> + '_ {
        self.pairs
            .iter()
            .map(move |&f| PairIndex::from_flat(f, self.p).expect("stored index in range"))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sum of the `k` largest values.
    pub fn top_sum(&self, k: usize) -> Result<S> {
        if k == 0 || k > self.values.len() {
            return Err(Error::KOutOfRange {
                k,
                p_star: self.values.len(),
            });
        }
        Ok(self.values[..k].iter().copied().sum())
    }

    /// Running sums `T_1, T_2, …, T_len`.
    pub fn prefix_sums(&self) -> Vec<S> {
        self.values
            .iter()
            .scan(S::zero(), |acc, &v| {
                *acc = *acc + v;
                Some(*acc)
            })
            .collect()
    }
}

fn descending_by_value<S: Scalar>(values: &[S]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .expect("spectrum values are finite")
            .then(a.cmp(&b))
    }
}

/// Indices of the `k` largest entries, largest first, ties by index.
/// Quickselect partitions out the top `k` before only those are sorted.
fn top_indices<S: Scalar>(values: &[S], k: usize) -> Vec<usize> {
    let cmp = descending_by_value(values);
    let mut idx: Vec<usize> = (0..values.len()).collect();
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, &cmp);
        idx.truncate(k);
    }
    idx.sort_unstable_by(&cmp);
    idx
}

/// Ordered spectrum of `n·ρ̂²_ij`.
pub fn spectrum<S: Scalar>(data: &DataMatrix<S>, mode: SpectrumMode) -> Result<CorrSpectrum<S>> {
    let values = scaled_squared_correlations(data);
    CorrSpectrum::from_pair_values(data.n(), data.p(), &values, mode)
}

/// `Σ_{i<j} σ̂_ij⁴` with divisor-`n` sample covariances.
pub fn covariance_spectrum4<S: Scalar>(data: &DataMatrix<S>) -> S {
    let centered = Centered::new(data);
    let inv_n = S::from_usize_lossy(data.n()).recip();
    let mut total = S::zero();
    for i in 0..data.p() {
        for j in i + 1..data.p() {
            let cov = dot(centered.column(i), centered.column(j)) * inv_n;
            let sq = cov * cov;
            total = total + sq * sq;
        }
    }
    total
}
