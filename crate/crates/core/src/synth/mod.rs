//! Synthetic text with a known two-dimensional latent structure.
//!
//! Latent codes come from a five-component Gaussian mixture; each code is
//! turned into a token sequence by a randomly initialized, frozen LSTM
//! language model. Ground-truth codes and component labels are kept for
//! probing and plotting.

mod generator;
mod io;
mod mixture;

pub use generator::{GeneratorSpec, SequenceGenerator};
pub use io::{format_split, load_dataset, parse_split, persist_dataset, SPLIT_NAMES};
pub use mixture::{nearest_component, sample_latents, MixtureSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{seeded_rng, Tensor};

/// Stream ids carved out of the dataset seed.
const STREAM_GENERATOR: u64 = 1;
const STREAM_LATENTS: u64 = 2;
const STREAM_TOKENS_BASE: u64 = 1 << 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub label: usize,
    pub z: Vec<f64>,
    pub tokens: Vec<usize>,
}

/// One split with the extents shared by every example.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub vocab: usize,
    pub len: usize,
    pub dim: usize,
    pub components: usize,
    pub examples: Vec<Example>,
}

impl Split {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.examples.iter().map(|e| e.label).collect()
    }

    /// Ground-truth codes as a `count × dim` matrix.
    pub fn latents(&self) -> Tensor {
        let data = self.examples.iter().flat_map(|e| e.z.iter().copied()).collect();
        Tensor::matrix(self.len(), self.dim, data)
    }

    /// Token sequences of the selected rows.
    pub fn tokens(&self, rows: &[usize]) -> Vec<Vec<usize>> {
        rows.iter().map(|&i| self.examples[i].tokens.clone()).collect()
    }

    pub fn all_tokens(&self) -> Vec<Vec<usize>> {
        self.examples.iter().map(|e| e.tokens.clone()).collect()
    }

    /// Checks every example against the split extents.
    pub fn validate(&self) -> Result<()> {
        for (i, e) in self.examples.iter().enumerate() {
            if e.tokens.len() != self.len || e.z.len() != self.dim {
                return Err(Error::InvalidInput(format!("example {i} does not match the split extents")));
            }
            if let Some(t) = e.tokens.iter().find(|&&t| t >= self.vocab) {
                return Err(Error::InvalidInput(format!("example {i} has token {t} outside the vocabulary")));
            }
            if e.label >= self.components {
                return Err(Error::InvalidInput(format!("example {i} has label {} out of range", e.label)));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthDataset {
    pub train: Split,
    pub val: Split,
    pub test: Split,
}

impl SynthDataset {
    pub fn splits(&self) -> [&Split; 3] {
        [&self.train, &self.val, &self.test]
    }

    pub fn vocab(&self) -> usize {
        self.train.vocab
    }

    pub fn seq_len(&self) -> usize {
        self.train.len
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub mixture: MixtureSpec,
    pub generator: GeneratorSpec,
    /// Train, validation and test sizes.
    pub sizes: [usize; 3],
    pub seed: u64,
}

impl SynthConfig {
    /// 16000/2000/2000 examples over a 1000-token vocabulary.
    pub fn paper(seed: u64) -> Self {
        SynthConfig {
            mixture: MixtureSpec::default(),
            generator: GeneratorSpec::default(),
            sizes: [16_000, 2_000, 2_000],
            seed,
        }
    }

    /// 4000/500/500 examples over a 200-token vocabulary.
    pub fn desk(seed: u64) -> Self {
        SynthConfig {
            mixture: MixtureSpec::default(),
            generator: GeneratorSpec {
                vocab: 200,
                ..GeneratorSpec::default()
            },
            sizes: [4_000, 500, 500],
            seed,
        }
    }
}

impl SynthConfig {
    /// `desk` or `paper`.
    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk(seed)),
            "paper" => Ok(Self::paper(seed)),
            other => Err(Error::Config(format!("unknown data preset {other:?} (desk | paper)"))),
        }
    }

    /// Sets one `data.*` key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
        }
        match key {
            "data.train" => self.sizes[0] = parse(key, value)?,
            "data.val" => self.sizes[1] = parse(key, value)?,
            "data.test" => self.sizes[2] = parse(key, value)?,
            "data.vocab" => self.generator.vocab = parse(key, value)?,
            "data.len" => self.generator.seq_len = parse(key, value)?,
            "data.hidden" => self.generator.hidden = parse(key, value)?,
            "data.embedding" => self.generator.embedding = parse(key, value)?,
            "data.recurrent_init" => self.generator.recurrent_init = parse(key, value)?,
            "data.output_init" => self.generator.output_init = parse(key, value)?,
            "data.variance" => self.mixture.variance = parse(key, value)?,
            "data.seed" => self.seed = parse(key, value)?,
            // chosen before the other keys are applied
            "data.preset" => {}
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Builds a config from the `[data]` table of a TOML document, starting
    /// from its `preset` (default `desk`).
    pub fn from_toml(text: &str, seed: u64) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        let mut flat = Vec::new();
        crate::models::flatten("", &toml::Value::Table(table), &mut flat);
        let preset = flat
            .iter()
            .find(|(k, _)| k == "data.preset")
            .map_or("desk", |(_, v)| v.as_str());
        let mut cfg = Self::preset(preset, seed)?;
        for (k, v) in &flat {
            if k.starts_with("data.") {
                cfg.set(k, v)?;
            }
        }
        Ok(cfg)
    }
}

/// Builds the whole dataset. A pure function of the config.
pub fn generate_dataset(cfg: &SynthConfig) -> Result<SynthDataset> {
    cfg.mixture.validate()?;
    cfg.generator.validate()?;
    if cfg.sizes.contains(&0) {
        return Err(Error::InvalidInput("every split needs at least one example".into()));
    }
    let dim = cfg.mixture.dim();
    let generator = SequenceGenerator::new(&cfg.generator, dim, &mut seeded_rng(cfg.seed, STREAM_GENERATOR));
    let total: usize = cfg.sizes.iter().sum();
    let (z, labels) = sample_latents(&cfg.mixture, total, &mut seeded_rng(cfg.seed, STREAM_LATENTS))?;
    let tokens = generator.generate(&z, |i| seeded_rng(cfg.seed, STREAM_TOKENS_BASE + i as u64))?;

    let mut examples = labels
        .into_iter()
        .zip(tokens)
        .enumerate()
        .map(|(i, (label, tokens))| Example {
            label,
            z: z.row_slice(i).to_vec(),
            tokens,
        });
    let mut take = |count: usize| Split {
        vocab: cfg.generator.vocab,
        len: cfg.generator.seq_len,
        dim,
        components: cfg.mixture.components(),
        examples: examples.by_ref().take(count).collect(),
    };
    Ok(SynthDataset {
        train: take(cfg.sizes[0]),
        val: take(cfg.sizes[1]),
        test: take(cfg.sizes[2]),
    })
}
