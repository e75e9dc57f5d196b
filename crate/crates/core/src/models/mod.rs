//! The VAE variants on sequence data: configuration, the ELBO with KL
//! annealing and free bits, training, importance-weighted evaluation and
//! checkpoints.

mod checkpoint;
mod config;
mod objective;
mod optim;
mod seqvae;
mod train;

pub use checkpoint::{BnRecord, Checkpoint, ParamRecord, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub(crate) use config::flatten;
pub use config::{ModelDims, OptimizerKind, TrainConfig, Variant};
pub use objective::{anneal_weight, iw_nll, IwEstimate, DEFAULT_IW_SAMPLES};
pub use optim::{clip_grad_norm, Optimizer};
pub use seqvae::{ElboOutput, ElboParts, Posterior, SeqVae, StepNoise};
pub use train::{
    format_metric_log, split_metrics, train, train_with, validation_loss, write_metric_log, EpochLog, StopReason,
    TrainOutcome, TrainState, METRIC_LOG_HEADER,
};
