//! Closed-form diagonal-Gaussian mathematics and latent-space diagnostics:
//! KL to the prior, symmetric KL, mutual posterior diversity (MPD),
//! conditional entropy (CE), mutual information, active units, the dropout
//! expectation identities and collapse diagnosis.

mod diagnosis;
mod divergence;
mod dropout_theory;
pub mod dump;
mod entropy;
mod information;
mod report;

pub use diagnosis::{collapse_diagnosis, CollapseDiagnosis};
pub use divergence::{
    kl_to_std, mpd, mpd_moment_decomposition, mpd_population_lower_bound, sym_kl,
};
pub use dropout_theory::{dropout_expectations, prop1_verify, DropoutExpectations, Prop1Report};
pub use entropy::{ce, gaussian_entropy};
pub use information::{au, is_active, mi_estimate, mi_estimate_detailed, ActiveUnits, MiEstimate, AU_THRESHOLD};
pub use report::MetricReport;

use crate::error::{Error, Result};
use crate::numcore::Tensor;

/// `α = 1/(2πe)`: a Gaussian with this variance has zero differential
/// entropy, so flooring every posterior variance at `α` keeps CE ≥ 0.
pub const NOISE_FLOOR: f64 = 1.0 / (2.0 * std::f64::consts::PI * std::f64::consts::E);

/// `log 2πe`.
pub(crate) const LOG_2PI_E: f64 = 2.837_877_066_409_345_5;

pub(crate) const LOG_2PI: f64 = 1.837_877_066_409_345_5;

fn check_variances(op: &'static str, v: &[f64]) -> Result<()> {
    match v.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        Some(bad) => Err(Error::domain(op, format!("variance {bad} is not positive and finite"))),
        None => Ok(()),
    }
}

/// Diagonal Gaussian `N(mean, diag(variance))`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagGaussian {
    mean: Vec<f64>,
    variance: Vec<f64>,
}

impl DiagGaussian {
    pub fn new(mean: Vec<f64>, variance: Vec<f64>) -> Result<Self> {
        if mean.len() != variance.len() {
            return Err(Error::shape(
                "diag_gaussian",
                format!("{} means vs {} variances", mean.len(), variance.len()),
            ));
        }
        check_variances("diag_gaussian", &variance)?;
        Ok(DiagGaussian { mean, variance })
    }

    pub fn standard(n: usize) -> Self {
        DiagGaussian {
            mean: vec![0.0; n],
            variance: vec![1.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn variance(&self) -> &[f64] {
        &self.variance
    }

    pub fn log_density(&self, z: &[f64]) -> f64 {
        log_density_parts(&self.mean, &self.variance, z)
    }

    /// Whether every variance is at or above the entropy noise floor.
    pub fn respects_floor(&self, alpha: f64) -> bool {
        self.variance.iter().all(|&v| v >= alpha)
    }
}

pub(crate) fn log_density_parts(mean: &[f64], var: &[f64], z: &[f64]) -> f64 {
    let mut acc = 0.0;
    for ((&m, &v), &x) in mean.iter().zip(var).zip(z) {
        let d = x - m;
        acc += -0.5 * (LOG_2PI + v.ln() + d * d / v);
    }
    acc
}

/// Posterior parameters for a population of `B` datapoints, row-major `B × n`.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorBatch {
    n: usize,
    means: Vec<f64>,
    variances: Vec<f64>,
}

impl PosteriorBatch {
    pub fn new(n: usize, means: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("latent dimensionality must be ≥ 1".into()));
        }
        if means.len() != variances.len() || means.len() % n != 0 {
            return Err(Error::shape(
                "posterior_batch",
                format!("{} means, {} variances for n = {n}", means.len(), variances.len()),
            ));
        }
        if means.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        check_variances("posterior_batch", &variances)?;
        Ok(PosteriorBatch {
            n,
            means,
            variances,
        })
    }

    pub fn from_rows(means: &[Vec<f64>], variances: &[Vec<f64>]) -> Result<Self> {
        let n = means.first().map_or(0, Vec::len);
        if means.len() != variances.len() {
            return Err(Error::shape(
                "posterior_batch",
                format!("{} mean rows vs {} variance rows", means.len(), variances.len()),
            ));
        }
        for (i, (m, v)) in means.iter().zip(variances).enumerate() {
            if m.len() != n || v.len() != n {
                return Err(Error::shape("posterior_batch", format!("row {i} has the wrong width")));
            }
        }
        Self::new(n, means.concat(), variances.concat())
    }

    pub fn from_tensors(means: &Tensor, variances: &Tensor) -> Result<Self> {
        if means.dims2() != variances.dims2() {
            return Err(Error::shape(
                "posterior_batch",
                format!("{:?} vs {:?}", means.shape(), variances.shape()),
            ));
        }
        Self::new(means.cols(), means.data().to_vec(), variances.data().to_vec())
    }

    pub fn from_gaussians(qs: &[DiagGaussian]) -> Result<Self> {
        let means: Vec<Vec<f64>> = qs.iter().map(|q| q.mean.clone()).collect();
        let vars: Vec<Vec<f64>> = qs.iter().map(|q| q.variance.clone()).collect();
        Self::from_rows(&means, &vars)
    }

    /// Number of datapoints `B`.
    pub fn len(&self) -> usize {
        self.means.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn mean_row(&self, i: usize) -> &[f64] {
        &self.means[i * self.n..(i + 1) * self.n]
    }

    pub fn var_row(&self, i: usize) -> &[f64] {
        &self.variances[i * self.n..(i + 1) * self.n]
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn means_tensor(&self) -> Tensor {
        Tensor::matrix(self.len(), self.n, self.means.clone())
    }

    pub fn gaussian(&self, i: usize) -> DiagGaussian {
        DiagGaussian {
            mean: self.mean_row(i).to_vec(),
            variance: self.var_row(i).to_vec(),
        }
    }

    /// Column `d` of the means.
    pub fn mean_column(&self, d: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.means[i * self.n + d]).collect()
    }

    pub fn var_column(&self, d: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.variances[i * self.n + d]).collect()
    }

    pub(crate) fn require_pairs(&self) -> Result<()> {
        if self.len() < 2 {
            Err(Error::InsufficientData {
                needed: 2,
                got: self.len(),
            })
        } else {
            Ok(())
        }
    }
}

/// Unbiased (`B − 1`) sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let b = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / b;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (b - 1.0)
}
