use serde::{Deserialize, Serialize};

use super::{log_density_parts, sample_variance, PosteriorBatch, LOG_2PI_E};
use crate::error::{Error, Result};
use crate::numcore::rng::standard_normal;
use crate::numcore::{log_sum_exp, RngStream, Tensor};

/// A latent dimension is active when the variance of its posterior mean
/// across the data is strictly greater than this.
pub const AU_THRESHOLD: f64 = 0.01;

pub fn is_active(activity: f64) -> bool {
    activity > AU_THRESHOLD
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActiveUnits {
    /// Per-dimension activity `A_d`: sample variance of `μ_d` over the batch.
    pub activity: Vec<f64>,
    pub count: usize,
}

/// Active units from a `B × n` matrix of posterior means.
pub fn au(means: &Tensor) -> Result<ActiveUnits> {
    let (b, n) = means.dims2();
    if b < 2 {
        return Err(Error::InsufficientData { needed: 2, got: b });
    }
    let activity: Vec<f64> = (0..n)
        .map(|d| {
            let col: Vec<f64> = (0..b).map(|i| means.get(i, d)).collect();
            sample_variance(&col)
        })
        .collect();
    let count = activity.iter().filter(|&&a| is_active(a)).count();
    Ok(ActiveUnits { activity, count })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MiEstimate {
    /// Clamped at zero.
    pub mi: f64,
    /// The unclamped difference of the two terms.
    pub raw: f64,
    /// `−E_x[H(q(z|x))]`, closed form.
    pub neg_entropy: f64,
    /// Monte-Carlo estimate of `E_x E_{q(z|x)}[log q_agg(z)]`.
    pub log_aggregate: f64,
    /// Standard error of the Monte-Carlo term.
    pub stderr: f64,
}

/// `I(x, z) = −E_x[H(q(z|x))] − E_x E_{q(z|x)}[−log q_agg(z)]` with
/// `q_agg = (1/B) Σ_j q(z|x_j)` and the second term estimated from
/// `samples_per_point` draws `z ~ q(z|x_i)` for every `i`.
pub fn mi_estimate(batch: &PosteriorBatch, samples_per_point: usize, rng: &mut RngStream) -> Result<f64> {
    Ok(mi_estimate_detailed(batch, samples_per_point, rng)?.mi)
}

pub fn mi_estimate_detailed(
    batch: &PosteriorBatch,
    samples_per_point: usize,
    rng: &mut RngStream,
) -> Result<MiEstimate> {
    batch.require_pairs()?;
    if samples_per_point == 0 {
        return Err(Error::InvalidInput("samples_per_point must be ≥ 1".into()));
    }
    let (b, n) = (batch.len(), batch.dim());
    let neg_entropy = -(0.5 * n as f64 * LOG_2PI_E + 0.5 * batch.variances().iter().map(|v| v.ln()).sum::<f64>() / b as f64);

    let log_b = (b as f64).ln();
    let mut z = vec![0.0; n];
    let mut comps = vec![0.0; b];
    let (mut sum, mut sum_sq, mut count) = (0.0, 0.0, 0usize);
    for i in 0..b {
        let (m, v) = (batch.mean_row(i), batch.var_row(i));
        for _ in 0..samples_per_point {
            for d in 0..n {
                z[d] = m[d] + v[d].sqrt() * standard_normal(rng);
            }
            for (j, c) in comps.iter_mut().enumerate() {
                *c = log_density_parts(batch.mean_row(j), batch.var_row(j), &z);
            }
            let term = log_sum_exp(&comps) - log_b;
            sum += term;
            sum_sq += term * term;
            count += 1;
        }
    }
    let c = count as f64;
    let log_aggregate = sum / c;
    let var = if count > 1 {
        (sum_sq - c * log_aggregate * log_aggregate) / (c - 1.0)
    } else {
        0.0
    };
    let raw = neg_entropy - log_aggregate;
    Ok(MiEstimate {
        mi: raw.max(0.0),
        raw,
        neg_entropy,
        log_aggregate,
        stderr: (var.max(0.0) / c).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::seeded_rng;

    #[test]
    fn au_constant_means() {
        let r = au(&Tensor::matrix(4, 2, vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0, 1.0, 2.0])).unwrap();
        assert_eq!(r.activity, vec![0.0, 0.0]);
        assert_eq!(r.count, 0);
    }

    #[test]
    fn au_two_point_dimension() {
        let r = au(&Tensor::matrix(2, 1, vec![-1.0, 1.0])).unwrap();
        assert_eq!(r.activity, vec![2.0]);
        assert_eq!(r.count, 1);
    }

    #[test]
    fn au_threshold_is_strict() {
        assert!(!is_active(AU_THRESHOLD));
        assert!(is_active(AU_THRESHOLD + 1e-15));
    }

    #[test]
    fn au_needs_two_rows() {
        assert!(au(&Tensor::matrix(1, 3, vec![0.0; 3])).is_err());
    }

    #[test]
    fn mi_of_prior_posteriors_is_near_zero() {
        let b = PosteriorBatch::new(2, vec![0.0; 40], vec![1.0; 40]).unwrap();
        let mut rng = seeded_rng(1, 0);
        let est = mi_estimate_detailed(&b, 200, &mut rng).unwrap();
        assert!(est.raw.abs() < 4.0 * est.stderr + 1e-12, "{est:?}");
    }

    #[test]
    fn mi_of_identical_non_prior_posteriors_is_near_zero() {
        let b = PosteriorBatch::new(2, [1.5, -0.5].repeat(30), [0.3, 0.6].repeat(30)).unwrap();
        let mut rng = seeded_rng(2, 0);
        let est = mi_estimate_detailed(&b, 200, &mut rng).unwrap();
        assert!(est.raw.abs() < 4.0 * est.stderr + 1e-12, "{est:?}");
    }
}
