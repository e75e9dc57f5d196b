use serde::{Deserialize, Serialize};

use super::IafChain;
use crate::error::{Error, Result};
use crate::latent::{gaussian_entropy, sym_kl, DiagGaussian};
use crate::numcore::rng::standard_normal;
use crate::numcore::{RngStream, Tensor};

/// Smallest sample count accepted by the Monte-Carlo flow checks.
pub const MIN_FLOW_SAMPLES: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowEntropy {
    pub h_z0: f64,
    pub h_zt: f64,
    pub stderr: f64,
}

impl FlowEntropy {
    pub fn decreased(&self) -> bool {
        self.h_zt < self.h_z0
    }
}

fn draw(q: &DiagGaussian, samples: usize, rng: &mut RngStream) -> Tensor {
    let n = q.dim();
    let mut data = Vec::with_capacity(samples * n);
    for _ in 0..samples {
        for d in 0..n {
            data.push(q.mean()[d] + q.variance()[d].sqrt() * standard_normal(rng));
        }
    }
    Tensor::matrix(samples, n, data)
}

fn mean_and_var(xs: &[f64]) -> (f64, f64) {
    let c = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / c;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (c - 1.0);
    (mean, var)
}

fn check_samples(samples: usize) -> Result<()> {
    if samples < MIN_FLOW_SAMPLES {
        return Err(Error::Precondition(format!(
            "{samples} samples, the flow checks need at least {MIN_FLOW_SAMPLES}"
        )));
    }
    Ok(())
}

/// `H[z_T] = H[z_0] + E[log |det ∂z_T/∂z_0|]`, with the first term in closed
/// form and the expectation estimated from `samples` draws of `z_0 ~ base`.
pub fn flow_entropy_mc(
    chain: &IafChain,
    base: &DiagGaussian,
    ctx: Option<&[f64]>,
    samples: usize,
    rng: &mut RngStream,
) -> Result<FlowEntropy> {
    check_samples(samples)?;
    if base.dim() != chain.dim() {
        return Err(Error::shape("flow_entropy", format!("base n = {} vs flow n = {}", base.dim(), chain.dim())));
    }
    let ctx = ctx.map(|c| Tensor::row(c.to_vec()));
    let z0 = draw(base, samples, rng);
    let out = chain.transform(&z0, ctx.as_ref())?;
    let (mean, var) = mean_and_var(&out.log_det);
    let h_z0 = gaussian_entropy(base);
    Ok(FlowEntropy {
        h_z0,
        h_zt: h_z0 + mean,
        stderr: (var / samples as f64).sqrt(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum InvarianceStatus {
    Checked { within: bool },
    /// A context-dependent flow applies a different map to each posterior,
    /// so the divergence is not preserved.
    NotApplicable,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub skl_z0: f64,
    pub skl_zt: f64,
    pub stderr: f64,
    pub status: InvarianceStatus,
}

/// Compares the closed-form symmetric KL of two Gaussians with a
/// Monte-Carlo estimate of the symmetric KL between their pushforwards
/// under one shared flow. Densities of the pushforwards come from the
/// change of variables through the numerical inverse.
pub fn mpd_invariance_check(
    chain: &IafChain,
    q1: &DiagGaussian,
    q2: &DiagGaussian,
    samples: usize,
    rng: &mut RngStream,
) -> Result<InvarianceReport> {
    let skl_z0 = sym_kl(q1, q2)?;
    if chain.uses_context() {
        return Ok(InvarianceReport {
            skl_z0,
            skl_zt: f64::NAN,
            stderr: f64::NAN,
            status: InvarianceStatus::NotApplicable,
        });
    }
    check_samples(samples)?;
    if q1.dim() != chain.dim() {
        return Err(Error::shape("mpd_invariance", format!("q n = {} vs flow n = {}", q1.dim(), chain.dim())));
    }

    // log q_T(y) = log q(f⁻¹(y)) − log|det| at f⁻¹(y)
    let directed = |from: &DiagGaussian, to: &DiagGaussian, rng: &mut RngStream| -> Result<Vec<f64>> {
        let fwd = chain.transform(&draw(from, samples, rng), None)?;
        let back = chain.inverse(&fwd.z_t, None)?;
        let back_det = chain.transform(&back, None)?.log_det;
        Ok((0..samples)
            .map(|i| {
                let log_from = from.log_density(fwd.z0.row_slice(i)) - fwd.log_det[i];
                let log_to = to.log_density(back.row_slice(i)) - back_det[i];
                log_from - log_to
            })
            .collect())
    };
    let (m12, v12) = mean_and_var(&directed(q1, q2, rng)?);
    let (m21, v21) = mean_and_var(&directed(q2, q1, rng)?);
    let s = samples as f64;
    let skl_zt = 0.5 * (m12 + m21);
    let stderr = 0.5 * (v12 / s + v21 / s).sqrt();
    Ok(InvarianceReport {
        skl_z0,
        skl_zt,
        stderr,
        status: InvarianceStatus::Checked {
            within: (skl_zt - skl_z0).abs() <= 3.0 * stderr,
        },
    })
}
