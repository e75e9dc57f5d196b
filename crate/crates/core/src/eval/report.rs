use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::latent::{
    au, ce, collapse_diagnosis, kl_to_std, mi_estimate, mpd_moment_decomposition, prop1_verify, CollapseDiagnosis,
    MetricReport, PosteriorBatch,
};
use crate::models::{iw_nll, split_metrics, validation_loss, SeqVae};
use crate::numcore::seeded_rng;
use crate::synth::Split;

/// Version of the `metrics.json` layout.
pub const METRICS_SCHEMA_VERSION: u32 = 1;

const STREAM_IW: u64 = 20;
const STREAM_MI: u64 = 21;
const STREAM_ELBO: u64 = 22;

/// Contents of `metrics.json` written by `dulab eval`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub variant: String,
    pub split: String,
    pub examples: usize,
    pub iw_samples: usize,
    pub seed: u64,
    /// Mean negative ELBO in evaluation mode.
    pub neg_elbo: f64,
    pub metrics: MetricReport,
}

/// Full evaluation of a model on one split. For flow variants `kl` is the
/// Monte-Carlo KL of the evaluation ELBO; everything else is computed on the
/// Gaussian posterior.
pub fn evaluate(
    model: &mut SeqVae,
    split: &Split,
    split_name: &str,
    iw_samples: usize,
    mi_samples: usize,
    seed: u64,
) -> Result<EvalReport> {
    let mut metrics = split_metrics(model, split, mi_samples, &mut seeded_rng(seed, STREAM_MI))?;
    let (neg_elbo, kl) = validation_loss(model, split, &mut seeded_rng(seed, STREAM_ELBO))?;
    if model.flow.is_some() {
        metrics.kl = kl;
    }
    let iw = iw_nll(model, &split.all_tokens(), iw_samples, &mut seeded_rng(seed, STREAM_IW))?;
    metrics.nll = Some(iw.nll);
    Ok(EvalReport {
        schema_version: METRICS_SCHEMA_VERSION,
        variant: model.variant.name().to_string(),
        split: split_name.to_string(),
        examples: split.len(),
        iw_samples,
        seed,
        neg_elbo,
        metrics,
    })
}

/// Contents of `metrics.json` written by `dulab metrics` from a posterior
/// dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumpReport {
    pub schema_version: u32,
    pub examples: usize,
    pub dim: usize,
    pub metrics: MetricReport,
    pub diagnosis: CollapseDiagnosis,
}

/// Tolerance of the collapse flags in [`DumpReport::diagnosis`].
pub const COLLAPSE_TOL: f64 = 1e-3;

/// Latent metrics of a posterior population; with `dropout = Some((p, α))`
/// the closed-form dropout report is included as well.
pub fn dump_metrics(
    batch: &PosteriorBatch,
    dropout: Option<(f64, f64)>,
    mi_samples: usize,
    seed: u64,
) -> Result<DumpReport> {
    let units = au(&batch.means_tensor())?;
    let kl = (0..batch.len()).map(|i| kl_to_std(&batch.gaussian(i))).sum::<f64>() / batch.len() as f64;
    let metrics = MetricReport {
        nll: None,
        kl,
        mi: mi_estimate(batch, mi_samples, &mut seeded_rng(seed, STREAM_MI))?,
        au_count: units.count,
        activity: units.activity,
        mpd: mpd_moment_decomposition(batch)?,
        ce: ce(batch),
        prop1: dropout.map(|(p, alpha)| prop1_verify(batch, p, alpha)).transpose()?,
    };
    Ok(DumpReport {
        schema_version: METRICS_SCHEMA_VERSION,
        examples: batch.len(),
        dim: batch.dim(),
        metrics,
        diagnosis: collapse_diagnosis(batch, COLLAPSE_TOL),
    })
}
