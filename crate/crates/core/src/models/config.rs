use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flows::IafConfig;
use crate::latent::NOISE_FLOOR;
use crate::regularizers::{BnMode, DEFAULT_BN_EPS, DEFAULT_BN_MOMENTUM};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Vanilla,
    Du,
    Bn,
    Fb,
    IafFb,
    DuIaf,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Vanilla,
        Variant::Du,
        Variant::Bn,
        Variant::Fb,
        Variant::IafFb,
        Variant::DuIaf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Vanilla => "vanilla",
            Variant::Du => "du",
            Variant::Bn => "bn",
            Variant::Fb => "fb",
            Variant::IafFb => "iaf-fb",
            Variant::DuIaf => "du-iaf",
        }
    }

    pub fn uses_bn(self) -> bool {
        matches!(self, Variant::Du | Variant::Bn | Variant::DuIaf)
    }

    pub fn uses_dropout(self) -> bool {
        matches!(self, Variant::Du | Variant::DuIaf)
    }

    pub fn uses_flow(self) -> bool {
        matches!(self, Variant::IafFb | Variant::DuIaf)
    }

    pub fn uses_free_bits(self) -> bool {
        matches!(self, Variant::Fb | Variant::IafFb)
    }

    pub fn default_bn_mode(self) -> BnMode {
        if self == Variant::Bn {
            BnMode::BnvaeFixedGamma
        } else {
            BnMode::DuRescale
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vanilla" => Ok(Variant::Vanilla),
            "du" | "du-vae" => Ok(Variant::Du),
            "bn" | "bn-vae" => Ok(Variant::Bn),
            "fb" => Ok(Variant::Fb),
            "iaf-fb" => Ok(Variant::IafFb),
            "du-iaf" => Ok(Variant::DuIaf),
            other => Err(Error::Config(format!("unknown variant {other:?}"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::Config(format!("unknown optimizer {other:?}"))),
        }
    }
}

/// Network widths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDims {
    pub embedding: usize,
    pub enc_hidden: usize,
    pub dec_hidden: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            embedding: 32,
            enc_hidden: 32,
            dec_hidden: 32,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub variant: Variant,
    pub latent: usize,
    pub dims: ModelDims,
    /// Target scale of the mean batch-norm.
    pub gamma: f64,
    /// Keep probability of the variance dropout.
    pub p: f64,
    pub alpha: f64,
    pub bn_mode: Option<BnMode>,
    /// β for the fixed-β ablation mode.
    pub bn_beta: f64,
    pub bn_momentum: f64,
    pub bn_eps: f64,
    pub lambda_fb: f64,
    pub iaf: IafConfig,
    pub anneal_epochs: usize,
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub decay: f64,
    pub patience: usize,
    pub max_decays: usize,
    pub clip: f64,
    pub seed: u64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Draws per datapoint for the per-epoch MI estimate.
    pub mi_samples: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            variant: Variant::Vanilla,
            latent: 2,
            dims: ModelDims::default(),
            gamma: 1.0,
            p: 0.5,
            alpha: NOISE_FLOOR,
            bn_mode: None,
            bn_beta: 0.0,
            bn_momentum: DEFAULT_BN_MOMENTUM,
            bn_eps: DEFAULT_BN_EPS,
            lambda_fb: 0.1,
            iaf: IafConfig {
                context: 16,
                ..IafConfig::default()
            },
            anneal_epochs: 10,
            optimizer: OptimizerKind::Sgd,
            lr: 0.1,
            decay: 0.5,
            patience: 5,
            max_decays: 5,
            clip: 5.0,
            seed: 0,
            batch_size: 32,
            max_epochs: 40,
            mi_samples: 1,
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .trim_matches('"')
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse {v:?} for {key}")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<usize>> {
    v.trim()
        .trim_start_matches('[')
        .trim_end_matches(']')
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(key, s))
        .collect()
}

impl TrainConfig {
    pub fn for_variant(variant: Variant) -> Self {
        let mut cfg = TrainConfig {
            variant,
            ..TrainConfig::default()
        };
        if variant == Variant::IafFb {
            cfg.lambda_fb = 0.15;
        }
        cfg
    }

    pub fn bn_mode(&self) -> BnMode {
        self.bn_mode.unwrap_or(self.variant.default_bn_mode())
    }

    /// Sets one dotted key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "variant" | "train.variant" => self.variant = parse(key, value)?,
            "latent" | "train.latent" | "model.latent" => self.latent = parse(key, value)?,
            "model.embedding" => self.dims.embedding = parse(key, value)?,
            "model.enc_hidden" => self.dims.enc_hidden = parse(key, value)?,
            "model.dec_hidden" => self.dims.dec_hidden = parse(key, value)?,
            "bn.gamma" | "gamma" => self.gamma = parse(key, value)?,
            "bn.mode" => self.bn_mode = Some(parse(key, value)?),
            "bn.beta" => self.bn_beta = parse(key, value)?,
            "bn.momentum" => self.bn_momentum = parse(key, value)?,
            "bn.eps" => self.bn_eps = parse(key, value)?,
            "du.p" | "p" => self.p = parse(key, value)?,
            "du.alpha" => self.alpha = parse(key, value)?,
            "fb.lambda" => self.lambda_fb = parse(key, value)?,
            "iaf.blocks" => self.iaf.blocks = parse(key, value)?,
            "iaf.hidden" => self.iaf.hidden = parse_list(key, value)?,
            "iaf.use_context" => {
                let on: bool = parse(key, value)?;
                self.iaf.context = if on { self.iaf.context.max(16) } else { 0 };
            }
            "iaf.context" => self.iaf.context = parse(key, value)?,
            "train.anneal_epochs" => self.anneal_epochs = parse(key, value)?,
            "train.optimizer" => self.optimizer = parse(key, value)?,
            "train.lr" | "lr" => self.lr = parse(key, value)?,
            "train.decay" => self.decay = parse(key, value)?,
            "train.patience" => self.patience = parse(key, value)?,
            "train.max_decays" => self.max_decays = parse(key, value)?,
            "train.clip" => self.clip = parse(key, value)?,
            "seed" | "train.seed" => self.seed = parse(key, value)?,
            "train.batch_size" => self.batch_size = parse(key, value)?,
            "train.epochs" | "train.max_epochs" => self.max_epochs = parse(key, value)?,
            "train.mi_samples" => self.mi_samples = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies every key of a TOML document; tables become dotted prefixes.
    /// Keys outside `sections` are skipped so one file can also configure
    /// data generation and evaluation.
    pub fn apply_toml(&mut self, text: &str) -> Result<()> {
        let table: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        let mut flat = Vec::new();
        flatten("", &toml::Value::Table(table), &mut flat);
        const SECTIONS: [&str; 7] = ["train.", "model.", "bn.", "du.", "fb.", "iaf.", "seed"];
        for (k, v) in flat {
            if SECTIONS.iter().any(|s| k.starts_with(s)) || k == "variant" {
                self.set(&k, &v)?;
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.latent == 0 {
            return bad("latent dimensionality must be ≥ 1".into());
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return bad(format!("du.p = {} outside (0, 1]", self.p));
        }
        if !(self.alpha > 0.0) || !(self.gamma > 0.0) {
            return bad("du.alpha and bn.gamma must be positive".into());
        }
        if !(self.lambda_fb >= 0.0) {
            return bad(format!("fb.lambda = {} must be ≥ 0", self.lambda_fb));
        }
        if self.batch_size < 2 {
            return bad("batch size must be ≥ 2".into());
        }
        if !(self.lr > 0.0) || !(self.decay > 0.0 && self.decay <= 1.0) || !(self.clip > 0.0) {
            return bad("lr, decay and clip must be positive (decay ≤ 1)".into());
        }
        if self.mi_samples == 0 {
            return bad("train.mi_samples must be ≥ 1".into());
        }
        Ok(())
    }
}

pub(crate) fn flatten(prefix: &str, v: &toml::Value, out: &mut Vec<(String, String)>) {
    match v {
        toml::Value::Table(t) => {
            for (k, child) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, child, out);
            }
        }
        toml::Value::String(s) => out.push((prefix.to_string(), s.clone())),
        toml::Value::Array(items) => {
            let parts: Vec<String> = items.iter().map(|i| i.to_string()).collect();
            out.push((prefix.to_string(), parts.join(",")));
        }
        other => out.push((prefix.to_string(), other.to_string())),
    }
}
