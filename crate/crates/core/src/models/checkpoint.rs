//! Versioned JSON checkpoints. Floats are written in shortest round-trip
//! form and parsed exactly, so save → load → save is byte-identical.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::train::TrainState;
use super::SeqVae;
use crate::error::{Error, Result};
use crate::numcore::Tensor;

pub const CHECKPOINT_FORMAT: &str = "duvae-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BnRecord {
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: TrainConfig,
    pub vocab: usize,
    pub seq_len: usize,
    pub params: Vec<ParamRecord>,
    pub bn: Option<BnRecord>,
    pub state: Option<TrainState>,
}

impl Checkpoint {
    pub fn capture(model: &SeqVae, config: &TrainConfig, state: Option<&TrainState>) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: config.clone(),
            vocab: model.vocab(),
            seq_len: model.seq_len(),
            params: model
                .parameters()
                .into_iter()
                .map(|p| ParamRecord {
                    name: p.name.clone(),
                    shape: p.value.shape().to_vec(),
                    data: p.value.data().to_vec(),
                })
                .collect(),
            bn: model.bn.as_ref().map(|b| BnRecord {
                running_mean: b.running_mean.clone(),
                running_var: b.running_var.clone(),
            }),
            state: state.cloned(),
        }
    }

    /// Rebuilds the model and overwrites every parameter by name.
    pub fn restore(&self) -> Result<SeqVae> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(Error::Unsupported(format!(
                "checkpoint {} v{}, expected {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION}",
                self.format, self.version
            )));
        }
        let mut model = SeqVae::new(&self.config, self.vocab, self.seq_len)?;
        {
            let params = model.parameters_mut();
            if params.len() != self.params.len() {
                return Err(Error::InvalidInput(format!(
                    "checkpoint has {} parameters, the model {}",
                    self.params.len(),
                    params.len()
                )));
            }
            for (p, rec) in params.into_iter().zip(&self.params) {
                if p.name != rec.name || p.value.shape() != rec.shape.as_slice() {
                    return Err(Error::InvalidInput(format!(
                        "checkpoint parameter {} {:?} does not fit {} {:?}",
                        rec.name,
                        rec.shape,
                        p.name,
                        p.value.shape()
                    )));
                }
                p.value = Tensor::new(rec.shape.clone(), rec.data.clone())?;
            }
        }
        match (&mut model.bn, &self.bn) {
            (Some(bn), Some(rec)) => {
                bn.running_mean = rec.running_mean.clone();
                bn.running_var = rec.running_var.clone();
            }
            (None, None) => {}
            _ => return Err(Error::InvalidInput("batch-norm statistics do not match the variant".into())),
        }
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
