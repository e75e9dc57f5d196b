//! Trains one variant on the desk-scale synthetic dataset, prints the
//! per-epoch metric log and saves a checkpoint.
//!
//! ```text
//! cargo run --release --example train_variant -- du 0 train.epochs=20
//! ```
//!
//! Arguments: variant (vanilla | du | bn | fb | iaf-fb | du-iaf), seed,
//! then any number of `key=value` config overrides.

use std::time::Instant;

use duvae::models::{train_with, Checkpoint, TrainConfig, Variant};
use duvae::synth::{generate_dataset, SynthConfig};

fn main() -> duvae::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let variant: Variant = args.get(1).map_or(Ok(Variant::Du), |s| s.parse())?;
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);

    let ds = generate_dataset(&SynthConfig::desk(seed))?;
    let mut cfg = TrainConfig::for_variant(variant);
    cfg.seed = seed;
    for kv in args.iter().skip(3) {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| duvae::Error::Config(format!("expected key=value, got {kv:?}")))?;
        cfg.set(k, v)?;
    }

    let start = Instant::now();
    let out = train_with(&cfg, &ds, |_, e| {
        println!(
            "epoch {:>3}  train {:8.4}  val {:8.4}  kl {:6.3}  mi {:6.3}  au {}  mpd {:7.3}  ce {:7.3}  lr {}  [{:.0?}]",
            e.epoch,
            e.train_loss,
            e.val_loss,
            e.kl,
            e.mi,
            e.au,
            e.mpd,
            e.ce,
            e.lr,
            start.elapsed()
        );
    })?;
    println!("stopped: {:?} after {} epochs", out.stop, out.state.epoch);

    let path = std::env::temp_dir().join(format!("duvae-{variant}-{seed}.json"));
    Checkpoint::capture(&out.model, &cfg, Some(&out.state)).save(&path)?;
    println!("checkpoint: {}", path.display());
    Ok(())
}
