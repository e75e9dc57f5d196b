use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::optim::{clip_grad_norm, Optimizer};
use super::seqvae::EVAL_CHUNK;
use super::{anneal_weight, SeqVae};
use crate::error::{Error, Result};
use crate::latent::{au, ce, mi_estimate, mpd_moment_decomposition, MetricReport, PosteriorBatch};
use crate::numcore::{seeded_rng, Graph, RngStream, StreamCursor};
use crate::regularizers::BnMode;
use crate::synth::{Split, SynthDataset};

const STREAM_SHUFFLE: u64 = 11;
const STREAM_NOISE: u64 = 12;
const STREAM_VAL: u64 = 13;
const STREAM_METRICS: u64 = 14;

/// One row of the metric log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub kl: f64,
    pub mi: f64,
    pub au: usize,
    pub mpd: f64,
    pub ce: f64,
    pub lr: f64,
    /// `√(mean_d γ_d²)` after the epoch, when the model has a batch-norm.
    pub gamma_rms: Option<f64>,
}

pub const METRIC_LOG_HEADER: &str = "epoch,train_loss,val_loss,kl,mi,au,mpd,ce,lr";

pub fn format_metric_log(log: &[EpochLog]) -> String {
    let mut out = format!("{METRIC_LOG_HEADER}\n");
    for e in log {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            e.epoch, e.train_loss, e.val_loss, e.kl, e.mi, e.au, e.mpd, e.ce, e.lr
        );
    }
    out
}

pub fn write_metric_log(log: &[EpochLog], path: &Path) -> Result<()> {
    std::fs::write(path, format_metric_log(log))?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    /// Epochs completed.
    pub epoch: usize,
    pub best_val: f64,
    pub decay_count: usize,
    pub stale_epochs: usize,
    pub optimizer: Optimizer,
    pub shuffle: StreamCursor,
    pub noise: StreamCursor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    MaxEpochs,
    LrDecays,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: SeqVae,
    pub log: Vec<EpochLog>,
    pub state: TrainState,
    pub stop: StopReason,
}

/// Closed-form KL for Gaussian posteriors; the flow variants report the
/// Monte-Carlo KL of the validation ELBO instead.
fn mean_kl(batch: &PosteriorBatch) -> f64 {
    let mut total = 0.0;
    for i in 0..batch.len() {
        total += crate::latent::kl_to_std(&batch.gaussian(i));
    }
    total / batch.len() as f64
}

/// Latent metrics for a split under the evaluation-mode posterior.
pub fn split_metrics(model: &SeqVae, split: &Split, mi_samples: usize, rng: &mut RngStream) -> Result<MetricReport> {
    let tokens = split.all_tokens();
    let batch = model.posterior_batch(&tokens)?;
    Ok(MetricReport {
        nll: None,
        kl: mean_kl(&batch),
        mi: mi_estimate(&batch, mi_samples, rng)?,
        au_count: au(&batch.means_tensor())?.count,
        activity: au(&batch.means_tensor())?.activity,
        mpd: mpd_moment_decomposition(&batch)?,
        ce: ce(&batch),
        prop1: None,
    })
}

/// Mean negative ELBO (weight 1) and mean KL in evaluation mode.
pub fn validation_loss(model: &mut SeqVae, split: &Split, rng: &mut RngStream) -> Result<(f64, f64)> {
    let tokens = split.all_tokens();
    let (mut loss, mut kl) = (0.0, 0.0);
    for chunk in tokens.chunks(EVAL_CHUNK) {
        let noise = model.sample_noise(chunk.len(), rng, false);
        let g = Graph::new();
        let out = model.elbo(&g, chunk, 1.0, &noise, false)?;
        loss += out.parts.loss * chunk.len() as f64;
        kl += out.parts.kl * chunk.len() as f64;
    }
    let n = tokens.len() as f64;
    Ok((loss / n, kl / n))
}

pub fn train(cfg: &TrainConfig, ds: &SynthDataset) -> Result<TrainOutcome> {
    train_with(cfg, ds, |_, _| {})
}

/// Trains with a callback after every epoch. A pure function of the
/// config and the dataset.
pub fn train_with(
    cfg: &TrainConfig,
    ds: &SynthDataset,
    mut on_epoch: impl FnMut(&SeqVae, &EpochLog),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if ds.train.len() < cfg.batch_size.min(2) || ds.val.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: ds.train.len().min(ds.val.len()),
        });
    }
    let mut model = SeqVae::new(cfg, ds.vocab(), ds.seq_len())?;
    let rescale = cfg.variant.uses_dropout() && model.bn.as_ref().is_some_and(|b| b.mode == BnMode::DuRescale);
    let mut opt = Optimizer::new(cfg.optimizer, cfg.lr);
    let mut shuffle_rng = seeded_rng(cfg.seed, STREAM_SHUFFLE);
    let mut noise_rng = seeded_rng(cfg.seed, STREAM_NOISE);
    let mut order: Vec<usize> = (0..ds.train.len()).collect();
    let mut log = Vec::new();
    let (mut best_val, mut decays, mut stale) = (f64::INFINITY, 0usize, 0usize);
    let mut stop = StopReason::MaxEpochs;
    let mut epochs_done = 0;

    for epoch in 0..cfg.max_epochs {
        let weight = anneal_weight(epoch, cfg.anneal_epochs);
        order.shuffle(&mut shuffle_rng);
        let (mut train_loss, mut seen) = (0.0, 0usize);
        for (bi, rows) in order.chunks(cfg.batch_size).enumerate() {
            if rows.len() < 2 {
                continue;
            }
            let tokens = ds.train.tokens(rows);
            let noise = model.sample_noise(rows.len(), &mut noise_rng, true);
            let g = Graph::new();
            let out = model.elbo(&g, &tokens, weight, &noise, true)?;
            if !out.parts.loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    detail: format!(
                        "batch {bi}: loss {} (recon {}, kl {}), lr {}, weight {weight}",
                        out.parts.loss, out.parts.recon, out.parts.kl, opt.lr
                    ),
                });
            }
            let grads = g.backward(out.loss)?;
            let mut params = model.trainable_mut();
            for p in params.iter_mut() {
                p.zero_grad();
                grads.accumulate_into(p);
            }
            clip_grad_norm(&mut params, cfg.clip);
            opt.apply(params);
            if rescale {
                if let Some(bn) = model.bn.as_mut() {
                    bn.rescale()?;
                }
            }
            train_loss += out.parts.loss * rows.len() as f64;
            seen += rows.len();
        }

        let mut val_rng = seeded_rng(cfg.seed, STREAM_VAL);
        let (val_loss, val_kl) = validation_loss(&mut model, &ds.val, &mut val_rng)?;
        if !val_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                detail: format!("validation loss {val_loss}, lr {}", opt.lr),
            });
        }
        let mut metric_rng = seeded_rng(cfg.seed, STREAM_METRICS);
        let m = split_metrics(&model, &ds.val, cfg.mi_samples, &mut metric_rng)?;
        let entry = EpochLog {
            epoch,
            train_loss: train_loss / seen.max(1) as f64,
            val_loss,
            kl: if model.flow.is_some() { val_kl } else { m.kl },
            mi: m.mi,
            au: m.au_count,
            mpd: m.mpd,
            ce: m.ce,
            lr: opt.lr,
            gamma_rms: model.bn.as_ref().map(|b| b.gamma_rms()),
        };
        on_epoch(&model, &entry);
        log.push(entry);
        epochs_done = epoch + 1;

        if val_loss < best_val {
            best_val = val_loss;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                stale = 0;
                decays += 1;
                opt.lr *= cfg.decay;
                if decays >= cfg.max_decays {
                    stop = StopReason::LrDecays;
                    break;
                }
            }
        }
    }
    let state = TrainState {
        epoch: epochs_done,
        best_val,
        decay_count: decays,
        stale_epochs: stale,
        optimizer: opt,
        shuffle: StreamCursor::capture(cfg.seed, &shuffle_rng),
        noise: StreamCursor::capture(cfg.seed, &noise_rng),
    };
    Ok(TrainOutcome { model, log, state, stop })
}
