// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod combine;
pub mod corr;
pub mod data;
pub mod error;
pub mod ltest;
pub mod methods;
pub mod permutation;
pub mod scalar;
pub mod simlab;
pub mod special;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type DataMatrixF64 = data::DataMatrix<f64>;
pub type DataMatrixF32 = data::DataMatrix<f32>;
pub type CorrSpectrumF64 = corr::CorrSpectrum<f64>;
pub type CorrSpectrumF32 = corr::CorrSpectrum<f32>;
pub type NullEnsembleF64 = permutation::NullEnsemble<f64>;
pub type NullEnsembleF32 = permutation::NullEnsemble<f32>;
