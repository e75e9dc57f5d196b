use super::{DiagGaussian, PosteriorBatch, LOG_2PI_E, NOISE_FLOOR};

/// Differential entropy `Σ_d ½ log(2πe δ_d²)`.
pub fn gaussian_entropy(q: &DiagGaussian) -> f64 {
    q.variance().iter().map(|v| 0.5 * (LOG_2PI_E + v.ln())).sum()
}

/// Conditional entropy of the latent space over the batch:
/// `(n/2)·log 2πe + ½ Σ_d mean_i[log δ²_{i,d}]`.
///
/// Logs are taken relative to the noise floor so a batch sitting exactly on
/// the floor sums exact zeros.
pub fn ce(batch: &PosteriorBatch) -> f64 {
    let b = batch.len() as f64;
    let mean_log: f64 = batch.variances().iter().map(|v| (v / NOISE_FLOOR).ln()).sum::<f64>() / b;
    0.5 * batch.dim() as f64 * (LOG_2PI_E + NOISE_FLOOR.ln()) + 0.5 * mean_log
}
