//! The `dulab` command line: data generation, training, evaluation,
//! posterior-dump metrics, the verification suite, visualization and the
//! linear probe. Every subcommand writes its artifacts under `--out`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::{
    aggregated_posterior_grid, dump_metrics, evaluate, linear_probe, run_verify, ProbeConfig, ProbeResult,
    DEFAULT_RESOLUTION, METRICS_SCHEMA_VERSION,
};
use crate::latent::dump::read_posterior_dump;
use crate::latent::NOISE_FLOOR;
use crate::models::{train_with, write_metric_log, Checkpoint, OptimizerKind, SeqVae, TrainConfig, Variant, DEFAULT_IW_SAMPLES};
use crate::synth::{generate_dataset, load_dataset, persist_dataset, Split, SynthConfig, SynthDataset};

#[derive(Debug, Parser)]
#[command(name = "dulab", version, about = "Diverse, low-uncertainty Gaussian VAEs on synthetic text")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML file with dotted keys (`[train]`, `[du]`, `[data]`, ...).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created when missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ModelInput {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Dataset directory written by `gen-data`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "test")]
    split: String,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic dataset (train.txt, val.txt, test.txt).
    GenData {
        #[command(flatten)]
        common: Common,
        /// `desk` (4000/500/500, vocab 200) or `paper` (16000/2000/2000, vocab 1000).
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        train: Option<usize>,
        #[arg(long)]
        val: Option<usize>,
        #[arg(long)]
        test: Option<usize>,
        #[arg(long)]
        vocab: Option<usize>,
    },
    /// Train a model; writes checkpoint.json and log.csv.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        variant: Option<Variant>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        latent: Option<usize>,
        #[arg(long)]
        optimizer: Option<OptimizerKind>,
        /// Any config key, e.g. `--set bn.mode=fixed-beta-ablation`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        /// Print one line per epoch to stderr.
        #[arg(long)]
        verbose: bool,
    },
    /// IW-NLL, KL, MI, AU, MPD and CE of a checkpoint; writes metrics.json.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: ModelInput,
        #[arg(long, default_value_t = DEFAULT_IW_SAMPLES)]
        iw_samples: usize,
        #[arg(long, default_value_t = 1)]
        mi_samples: usize,
    },
    /// Latent metrics of a posterior dump file; writes metrics.json.
    Metrics {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dump: PathBuf,
        /// Also report the closed-form effect of variance dropout at this keep probability.
        #[arg(long)]
        p: Option<f64>,
        #[arg(long, default_value_t = NOISE_FLOOR)]
        alpha: f64,
        #[arg(long, default_value_t = 1)]
        mi_samples: usize,
    },
    /// Run the verification suite; writes verify_report.json.
    Verify {
        #[command(flatten)]
        common: Common,
    },
    /// Aggregated posterior grid and mean scatter (CSV and SVG).
    Visualize {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: ModelInput,
        #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
        resolution: usize,
    },
    /// Linear probe on frozen representations; writes probe.json.
    Probe {
        #[command(flatten)]
        common: Common,
        /// Checkpoint to probe; omit together with `--ground-truth`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        /// Probe the generating latent codes instead of a model.
        #[arg(long)]
        ground_truth: bool,
        #[arg(long, default_value_t = 500)]
        epochs: usize,
        #[arg(long, default_value_t = 0.1)]
        lr: f64,
    },
}

/// Contents of `probe.json`.
#[derive(Debug, Serialize)]
pub struct ProbeReport {
    pub schema_version: u32,
    pub source: String,
    pub train_examples: usize,
    pub test_examples: usize,
    pub config: ProbeConfig,
    pub result: ProbeResult,
}

#[derive(Serialize)]
struct ErrorLine<'a> {
    error: ErrorBody<'a>,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    message: String,
}

/// Entry point shared by the binary and the tests. Returns the exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let line = ErrorLine {
                error: ErrorBody {
                    kind: e.kind(),
                    message: e.to_string(),
                },
            };
            eprintln!("{}", serde_json::to_string(&line).unwrap_or_else(|_| e.to_string()));
            1
        }
    }
}

fn read_config(common: &Common) -> Result<Option<String>> {
    common.config.as_deref().map(std::fs::read_to_string).transpose().map_err(Error::from)
}

fn prepare_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn pick_split<'a>(ds: &'a SynthDataset, name: &str) -> Result<&'a Split> {
    match name {
        "train" => Ok(&ds.train),
        "val" => Ok(&ds.val),
        "test" => Ok(&ds.test),
        other => Err(Error::InvalidInput(format!("unknown split {other:?} (train | val | test)"))),
    }
}

fn load_model(path: &Path) -> Result<SeqVae> {
    Checkpoint::load(path)?.restore()
}

/// Builds the training config: variant defaults, then the config file, then
/// `--set` keys, then the dedicated flags.
#[allow(clippy::too_many_arguments)]
fn train_config(
    text: Option<&str>,
    seed: Option<u64>,
    variant: Option<Variant>,
    gamma: Option<f64>,
    p: Option<f64>,
    lambda: Option<f64>,
    lr: Option<f64>,
    epochs: Option<usize>,
    latent: Option<usize>,
    optimizer: Option<OptimizerKind>,
    sets: &[String],
) -> Result<TrainConfig> {
    let mut probe = TrainConfig::default();
    if let Some(t) = text {
        probe.apply_toml(t)?;
    }
    let base = variant.unwrap_or(probe.variant);
    let mut cfg = TrainConfig::for_variant(base);
    if let Some(t) = text {
        cfg.apply_toml(t)?;
    }
    for kv in sets {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.variant = base;
    if let Some(v) = gamma {
        cfg.gamma = v;
    }
    if let Some(v) = p {
        cfg.p = v;
    }
    if let Some(v) = lambda {
        cfg.lambda_fb = v;
    }
    if let Some(v) = lr {
        cfg.lr = v;
    }
    if let Some(v) = epochs {
        cfg.max_epochs = v;
    }
    if let Some(v) = latent {
        cfg.latent = v;
    }
    if let Some(v) = optimizer {
        cfg.optimizer = v;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::GenData {
            common,
            preset,
            train,
            val,
            test,
            vocab,
        } => {
            let seed = common.seed.unwrap_or(0);
            let mut cfg = match read_config(&common)? {
                Some(text) => SynthConfig::from_toml(&text, seed)?,
                None => SynthConfig::desk(seed),
            };
            if let Some(name) = preset {
                let sizes_and_gen = SynthConfig::preset(&name, cfg.seed)?;
                cfg.sizes = sizes_and_gen.sizes;
                cfg.generator = sizes_and_gen.generator;
            }
            for (slot, v) in cfg.sizes.iter_mut().zip([train, val, test]) {
                if let Some(v) = v {
                    *slot = v;
                }
            }
            if let Some(v) = vocab {
                cfg.generator.vocab = v;
            }
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            prepare_out(&common.out)?;
            let ds = generate_dataset(&cfg)?;
            persist_dataset(&ds, &common.out)?;
            println!(
                "wrote {} train / {} val / {} test examples to {}",
                ds.train.len(),
                ds.val.len(),
                ds.test.len(),
                common.out.display()
            );
        }
        Command::Train {
            common,
            data,
            variant,
            gamma,
            p,
            lambda,
            lr,
            epochs,
            latent,
            optimizer,
            sets,
            verbose,
        } => {
            let text = read_config(&common)?;
            let cfg = train_config(
                text.as_deref(),
                common.seed,
                variant,
                gamma,
                p,
                lambda,
                lr,
                epochs,
                latent,
                optimizer,
                &sets,
            )?;
            let ds = load_dataset(&data)?;
            prepare_out(&common.out)?;
            let outcome = train_with(&cfg, &ds, |_, e| {
                if verbose {
                    eprintln!(
                        "epoch {:>3}  loss {:.4}  val {:.4}  kl {:.3}  mi {:.3}  au {}  lr {}",
                        e.epoch, e.train_loss, e.val_loss, e.kl, e.mi, e.au, e.lr
                    );
                }
            })?;
            Checkpoint::capture(&outcome.model, &cfg, Some(&outcome.state)).save(&common.out.join("checkpoint.json"))?;
            write_metric_log(&outcome.log, &common.out.join("log.csv"))?;
            let last = outcome.log.last();
            println!(
                "trained {} for {} epochs ({:?}); val loss {:.4}, kl {:.3}, mi {:.3}, au {}",
                cfg.variant,
                outcome.state.epoch,
                outcome.stop,
                last.map_or(f64::NAN, |e| e.val_loss),
                last.map_or(f64::NAN, |e| e.kl),
                last.map_or(f64::NAN, |e| e.mi),
                last.map_or(0, |e| e.au)
            );
        }
        Command::Eval {
            common,
            input,
            iw_samples,
            mi_samples,
        } => {
            let mut model = load_model(&input.checkpoint)?;
            let ds = load_dataset(&input.data)?;
            let split = pick_split(&ds, &input.split)?;
            prepare_out(&common.out)?;
            let report = evaluate(&mut model, split, &input.split, iw_samples, mi_samples, common.seed.unwrap_or(0))?;
            write_json(&report, &common.out.join("metrics.json"))?;
            let m = &report.metrics;
            println!(
                "{} on {}: nll {:.4}  kl {:.4}  mi {:.4}  au {}  mpd {:.4}  ce {:.4}",
                report.variant,
                report.split,
                m.nll.unwrap_or(f64::NAN),
                m.kl,
                m.mi,
                m.au_count,
                m.mpd,
                m.ce
            );
        }
        Command::Metrics {
            common,
            dump,
            p,
            alpha,
            mi_samples,
        } => {
            let batch = read_posterior_dump(&dump)?;
            prepare_out(&common.out)?;
            let report = dump_metrics(&batch, p.map(|p| (p, alpha)), mi_samples, common.seed.unwrap_or(0))?;
            write_json(&report, &common.out.join("metrics.json"))?;
            let m = &report.metrics;
            println!(
                "{} posteriors: kl {:.4}  mi {:.4}  au {}  mpd {:.4}  ce {:.4}",
                report.examples, m.kl, m.mi, m.au_count, m.mpd, m.ce
            );
        }
        Command::Verify { common } => {
            prepare_out(&common.out)?;
            let report = run_verify(common.seed.unwrap_or(0))?;
            write_json(&report, &common.out.join("verify_report.json"))?;
            for c in &report.checks {
                println!("{} {:<28} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if !report.passed {
                let names: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
                return Err(Error::Precondition(format!("verification failed: {}", names.join(", "))));
            }
        }
        Command::Visualize {
            common,
            input,
            resolution,
        } => {
            let model = load_model(&input.checkpoint)?;
            let ds = load_dataset(&input.data)?;
            let grid = aggregated_posterior_grid(&model, pick_split(&ds, &input.split)?, resolution)?;
            prepare_out(&common.out)?;
            std::fs::write(common.out.join("grid.csv"), grid.grid_csv())?;
            std::fs::write(common.out.join("scatter.csv"), grid.scatter_csv())?;
            std::fs::write(common.out.join("grid.svg"), grid.grid_svg())?;
            std::fs::write(common.out.join("scatter.svg"), grid.scatter_svg())?;
            println!(
                "{}×{} grid, {} local maxima, mass {:.4}",
                resolution,
                resolution,
                grid.local_maxima().len(),
                grid.mass()
            );
        }
        Command::Probe {
            common,
            checkpoint,
            data,
            ground_truth,
            epochs,
            lr,
        } => {
            let ds = load_dataset(&data)?;
            let (source, train_x, test_x) = match (checkpoint, ground_truth) {
                (Some(path), false) => {
                    let model = load_model(&path)?;
                    (
                        model.variant.name().to_string(),
                        model.extract_representation(&ds.train.all_tokens())?,
                        model.extract_representation(&ds.test.all_tokens())?,
                    )
                }
                (None, true) => ("ground-truth".to_string(), ds.train.latents(), ds.test.latents()),
                _ => {
                    return Err(Error::InvalidInput(
                        "give exactly one of --checkpoint and --ground-truth".into(),
                    ))
                }
            };
            let cfg = ProbeConfig {
                classes: ds.train.components,
                epochs,
                lr,
                seed: common.seed.unwrap_or(0),
            };
            let result = linear_probe(&train_x, &ds.train.labels(), &test_x, &ds.test.labels(), &cfg)?;
            prepare_out(&common.out)?;
            let report = ProbeReport {
                schema_version: METRICS_SCHEMA_VERSION,
                source,
                train_examples: ds.train.len(),
                test_examples: ds.test.len(),
                config: cfg,
                result,
            };
            write_json(&report, &common.out.join("probe.json"))?;
            println!(
                "{} probe: train accuracy {:.4}, test accuracy {:.4}",
                report.source, report.result.train_accuracy, report.result.test_accuracy
            );
        }
    }
    Ok(())
}
