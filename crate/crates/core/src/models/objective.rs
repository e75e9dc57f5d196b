use serde::{Deserialize, Serialize};

use super::SeqVae;
use crate::error::{Error, Result};
use crate::numcore::{log_sum_exp, RngStream};

/// Linear KL annealing: `min(1, epoch / anneal_epochs)`, and 1 throughout
/// when `anneal_epochs = 0`.
pub fn anneal_weight(epoch: usize, anneal_epochs: usize) -> f64 {
    if anneal_epochs == 0 {
        1.0
    } else {
        (epoch as f64 / anneal_epochs as f64).min(1.0)
    }
}

/// The paper's number of importance samples.
pub const DEFAULT_IW_SAMPLES: usize = 500;

/// Decoder rows evaluated per graph during importance weighting.
const IW_ROWS: usize = 4000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IwEstimate {
    pub nll: f64,
    pub per_example: Vec<f64>,
}

/// `−mean_x [logsumexp_k (log p(x, z_k) − log q(z_k|x)) − log K]` with the
/// evaluation-mode posterior.
pub fn iw_nll(model: &SeqVae, tokens: &[Vec<usize>], k: usize, rng: &mut RngStream) -> Result<IwEstimate> {
    if k == 0 {
        return Err(Error::InvalidInput("importance sample count K must be ≥ 1".into()));
    }
    if tokens.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let per_chunk = (IW_ROWS / k).max(1);
    let log_k = (k as f64).ln();
    let mut per_example = Vec::with_capacity(tokens.len());
    for chunk in tokens.chunks(per_chunk) {
        let w = model.log_weights(chunk, k, rng)?;
        for r in 0..chunk.len() {
            per_example.push(-(log_sum_exp(w.row_slice(r)) - log_k));
        }
    }
    let nll = per_example.iter().sum::<f64>() / per_example.len() as f64;
    Ok(IwEstimate { nll, per_example })
}
