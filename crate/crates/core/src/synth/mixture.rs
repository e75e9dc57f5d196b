use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::rng::standard_normal;
use crate::numcore::{RngStream, Tensor};

/// Equal-weight isotropic Gaussian mixture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub means: Vec<Vec<f64>>,
    pub variance: f64,
}

impl Default for MixtureSpec {
    fn default() -> Self {
        MixtureSpec {
            means: vec![
                vec![0.0, 0.0],
                vec![-2.0, -2.0],
                vec![-2.0, 2.0],
                vec![2.0, -2.0],
                vec![2.0, 2.0],
            ],
            variance: 1.0,
        }
    }
}

impl MixtureSpec {
    pub fn components(&self) -> usize {
        self.means.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        if self.means.is_empty() || self.dim() == 0 {
            return Err(Error::InvalidInput("the mixture needs at least one component".into()));
        }
        if self.means.iter().any(|m| m.len() != self.dim()) {
            return Err(Error::InvalidInput("mixture means differ in dimension".into()));
        }
        if !(self.variance >= 0.0 && self.variance.is_finite()) {
            return Err(Error::InvalidInput(format!("mixture variance {} is invalid", self.variance)));
        }
        Ok(())
    }
}

/// Draws `count` codes with their component labels.
pub fn sample_latents(spec: &MixtureSpec, count: usize, rng: &mut RngStream) -> Result<(Tensor, Vec<usize>)> {
    spec.validate()?;
    if count == 0 {
        return Err(Error::InvalidInput("count must be ≥ 1".into()));
    }
    let (k, n) = (spec.components(), spec.dim());
    let sd = spec.variance.sqrt();
    let mut z = Vec::with_capacity(count * n);
    let mut labels = Vec::with_capacity(count);
    for _ in 0..count {
        let c = rng.random_range(0..k);
        labels.push(c);
        for d in 0..n {
            z.push(spec.means[c][d] + sd * standard_normal(rng));
        }
    }
    Ok((Tensor::matrix(count, n, z), labels))
}

/// Index of the closest component mean.
pub fn nearest_component(spec: &MixtureSpec, z: &[f64]) -> usize {
    let dist = |m: &[f64]| m.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    (0..spec.components())
        .min_by(|&a, &b| dist(&spec.means[a]).total_cmp(&dist(&spec.means[b])))
        .unwrap_or(0)
}
