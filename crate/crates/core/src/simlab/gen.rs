//! Data generation for the independent-components model
//! `X_k = Σ^{1/2} Z_k` with a correlated leading block.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StudentT};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::data::{DataMatrix, RngStream};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_THETA: f64 = 1.5;
pub const DEFAULT_T_DF: f64 = 5.0;

/// Innovation law of the entries of `Z`; every variant has mean 0 and
/// variance 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnovationDist {
    Gaussian,
    /// Uniform on `(−√3, √3)`.
    Uniform,
    /// Student `t_ν` divided by `√(ν/(ν−2))`.
    Student { nu: f64 },
}

impl InnovationDist {
    pub fn student(nu: f64) -> Result<Self> {
        if !(nu > 2.0 && nu.is_finite()) {
            return Err(Error::InvalidConfig(format!("t innovations need 2 < nu < inf, got {nu}")));
        }
        Ok(InnovationDist::Student { nu })
    }

    /// Returns a per-draw sampler. Gaussian and Student draws both go
    /// through `rand_distr`.
    pub fn sampler(&self) -> Result<Sampler> {
        Ok(match *self {
            InnovationDist::Gaussian => Sampler::Gaussian,
            InnovationDist::Uniform => Sampler::Uniform,
            InnovationDist::Student { nu } => Sampler::Student {
                law: StudentT::new(nu).map_err(|e| Error::InvalidConfig(e.to_string()))?,
                scale: ((nu - 2.0) / nu).sqrt(),
            },
        })
    }
}

pub enum Sampler {
    Gaussian,
    Uniform,
    Student { law: StudentT<f64>, scale: f64 },
}

impl Sampler {
    pub fn draw(&self, stream: &mut RngStream) -> f64 {
        match self {
            Sampler::Gaussian => stream.standard_normal(),
            Sampler::Uniform => (2.0 * stream.uniform() - 1.0) * 3f64.sqrt(),
            Sampler::Student { law, scale } => law.sample(stream) * scale,
        }
    }
}

impl fmt::Display for InnovationDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InnovationDist::Gaussian => f.write_str("gaussian"),
            InnovationDist::Uniform => f.write_str("uniform"),
            InnovationDist::Student { nu } => write!(f, "t={nu}"),
        }
    }
}

impl FromStr for InnovationDist {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(InnovationDist::Gaussian),
            "uniform" => Ok(InnovationDist::Uniform),
            "t" => InnovationDist::student(DEFAULT_T_DF),
            other => match other.strip_prefix("t=") {
                Some(nu) => InnovationDist::student(
                    nu.parse()
                        .map_err(|_| Error::InvalidConfig(format!("bad degrees of freedom in {s:?}")))?,
                ),
                None => Err(Error::InvalidConfig(format!(
                    "unknown distribution {s:?}; expected gaussian, uniform or t=<nu>"
                ))),
            },
        }
    }
}

impl Serialize for InnovationDist {
    fn serialize<Se: Serializer>(&self, s: Se) -> std::result::Result<Se::Ok, Se::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for InnovationDist {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Leading `m × m` block with `σ_ij = (θ/(m(m−1)))^{|i−j|/4}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlternativeSpec {
    pub m: usize,
    pub theta: f64,
}

impl AlternativeSpec {
    pub fn new(m: usize, theta: f64) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidConfig(format!("block size m={m} must be at least 2")));
        }
        let pairs = (m * (m - 1)) as f64;
        if !(theta > 0.0 && theta < pairs) {
            return Err(Error::InvalidConfig(format!(
                "theta={theta} must lie in (0, m(m-1)) = (0, {pairs})"
            )));
        }
        Ok(AlternativeSpec { m, theta })
    }

    /// Number of dependent pairs, `m(m−1)/2`.
    pub fn sparsity(&self) -> usize {
        self.m * (self.m - 1) / 2
    }

    pub fn block_sigma(&self) -> DMatrix<f64> {
        let base = self.theta / (self.m * (self.m - 1)) as f64;
        DMatrix::from_fn(self.m, self.m, |i, j| base.powf(i.abs_diff(j) as f64 / 4.0))
    }

    /// Symmetric root of the block, which also checks it is PSD.
    pub fn block_root(&self) -> Result<DMatrix<f64>> {
        sym_sqrt(&self.block_sigma())
    }
}

/// Symmetric square root through the eigendecomposition. Eigenvalues down
/// to `−1e-8·‖Σ‖_F` are treated as rounding and clamped to zero.
pub fn sym_sqrt(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !sigma.is_square() {
        return Err(Error::InvalidData(format!("matrix is {}x{}, not square", sigma.nrows(), sigma.ncols())));
    }
    let norm = sigma.norm();
    if (sigma - sigma.transpose()).norm() > 1e-12 * norm.max(1.0) {
        return Err(Error::InvalidData("matrix is not symmetric".into()));
    }
    let eig = SymmetricEigen::new(sigma.clone());
    let min = eig.eigenvalues.min();
    if min < -1e-8 * norm {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    let root = v * DMatrix::from_diagonal(&roots) * v.transpose();
    Ok((&root + root.transpose()) * 0.5)
}

/// Draws `n` observations of dimension `p`. Each observation consumes `p`
/// innovations in coordinate order; under an alternative its first `m`
/// coordinates are then mixed by the symmetric root of the block.
pub fn gen_data<S: Scalar>(
    n: usize,
    p: usize,
    dist: InnovationDist,
    alt: Option<&AlternativeSpec>,
    stream: &mut RngStream,
) -> Result<DataMatrix<S>> {
    let root = match alt {
        Some(a) if a.m > p => {
            return Err(Error::InvalidConfig(format!("block size m={} exceeds p={p}", a.m)));
        }
        Some(a) => Some(a.block_root()?),
        None => None,
    };
    let sampler = dist.sampler()?;
    let mut values = vec![S::zero(); n * p];
    let mut z = vec![0.0; p];
    for row in 0..n {
        for v in z.iter_mut() {
            *v = sampler.draw(stream);
        }
        if let Some(r) = &root {
            let m = r.nrows();
            let mixed: Vec<f64> = (0..m).map(|i| (0..m).map(|j| r[(i, j)] * z[j]).sum()).collect();
            z[..m].copy_from_slice(&mixed);
        }
        for (col, &v) in z.iter().enumerate() {
            values[col * n + row] = S::lit(v);
        }
    }
    DataMatrix::from_column_major(n, p, values)
}
