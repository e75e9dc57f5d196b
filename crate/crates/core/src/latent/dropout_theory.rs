//! Closed-form expectations of variance dropout and the population-level
//! consequences for MPD and CE.

use serde::{Deserialize, Serialize};

use super::divergence::{moment_mpd, mpd_moment_decomposition};
use super::{ce, sample_variance, PosteriorBatch, LOG_2PI_E};
use crate::error::{Error, Result};

/// `E_g[1/δ̂²]` and `E_g[log δ̂²]` for `δ̂² = g·(δ² − α) + α`,
/// `g ∈ {0, 1/p}` with `P(g = 1/p) = p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DropoutExpectations {
    pub inv: f64,
    pub log: f64,
}

pub fn dropout_expectations(variance: f64, p: f64, alpha: f64) -> Result<DropoutExpectations> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Precondition(format!("keep probability p = {p} outside (0, 1]")));
    }
    if !(alpha > 0.0) {
        return Err(Error::Precondition(format!("noise floor α = {alpha} must be positive")));
    }
    if !(variance > alpha) {
        return Err(Error::Precondition(format!("variance {variance} must exceed α = {alpha}")));
    }
    let shifted = variance + (p - 1.0) * alpha;
    Ok(DropoutExpectations {
        inv: p * p / shifted + (1.0 - p) / alpha,
        log: p * (shifted / (p * alpha)).ln() + alpha.ln(),
    })
}

/// Population MPD/CE before and after variance dropout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prop1Report {
    pub p: f64,
    pub alpha: f64,
    pub mpd_before: f64,
    pub mpd_after: f64,
    pub ce_before: f64,
    pub ce_after: f64,
    /// `((1 − p)/α)·Σ_d Var[μ_d]`.
    pub eq8_bound: f64,
    pub mean_variance_before: f64,
    /// `E[δ̂²]` averaged over the batch; dropout is unbiased so this equals
    /// the value before.
    pub mean_variance_after: f64,
}

impl Prop1Report {
    pub fn mpd_increases(&self) -> bool {
        self.mpd_after > self.mpd_before
    }

    pub fn ce_decreases(&self) -> bool {
        self.ce_after < self.ce_before
    }

    pub fn bound_holds(&self) -> bool {
        self.mpd_after > self.eq8_bound
    }

    pub fn mean_variance_preserved(&self, rel_tol: f64) -> bool {
        (self.mean_variance_after - self.mean_variance_before).abs() <= rel_tol * self.mean_variance_before.abs()
    }

    pub fn mpd_gap(&self) -> f64 {
        self.mpd_after - self.mpd_before
    }

    pub fn ce_gap(&self) -> f64 {
        self.ce_before - self.ce_after
    }

    pub fn all_hold(&self) -> bool {
        self.mpd_increases() && self.ce_decreases() && self.bound_holds() && self.mean_variance_preserved(1e-12)
    }
}

/// Evaluates MPD and CE of the dropout-transformed population in closed form
/// by substituting [`dropout_expectations`] into the moment decompositions.
pub fn prop1_verify(batch: &PosteriorBatch, p: f64, alpha: f64) -> Result<Prop1Report> {
    batch.require_pairs()?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Precondition(format!("p = {p} must lie in (0, 1)")));
    }
    let (b, n) = (batch.len(), batch.dim());
    let mut inv = vec![0.0; b * n];
    let mut log = vec![0.0; b * n];
    for (k, &v) in batch.variances().iter().enumerate() {
        let e = dropout_expectations(v, p, alpha)?;
        inv[k] = e.inv;
        log[k] = e.log;
    }
    let mpd_before = mpd_moment_decomposition(batch)?;
    let mpd_after = moment_mpd(batch, |d, i| batch.var_row(i)[d], |d, i| inv[i * n + d]);
    let ce_after = 0.5 * n as f64 * LOG_2PI_E + 0.5 * log.iter().sum::<f64>() / b as f64;
    let spread: f64 = (0..n).map(|d| sample_variance(&batch.mean_column(d))).sum();
    let mean_variance = batch.variances().iter().sum::<f64>() / (b * n) as f64;
    Ok(Prop1Report {
        p,
        alpha,
        mpd_before,
        mpd_after,
        ce_before: ce(batch),
        ce_after,
        eq8_bound: (1.0 - p) / alpha * spread,
        mean_variance_before: mean_variance,
        // E[g(δ² − α) + α] = δ² for every coordinate
        mean_variance_after: mean_variance,
    })
}
