//! The two posterior regularizers: normalized-Bernoulli dropout on the
//! variances and batch normalization with γ-rescaling on the means, plus
//! the variance head that enforces the entropy noise floor.

mod batchnorm;
mod dropout;

pub use batchnorm::{BnMode, MeanBatchNorm, DEFAULT_BN_EPS, DEFAULT_BN_MOMENTUM};
pub use dropout::{apply_variance_dropout, variance_from_raw, VarianceDropout, RAW_CLAMP};
