//! Generates the desk-scale synthetic dataset, prints a few sequences and
//! per-component statistics, and writes it to a directory.
//!
//! ```text
//! cargo run --release --example synthetic_data -- /tmp/duvae-data
//! ```

use std::path::PathBuf;

use duvae::synth::{generate_dataset, load_dataset, nearest_component, persist_dataset, MixtureSpec, SynthConfig};

fn main() -> duvae::Result<()> {
    let dir: PathBuf = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("duvae-data"), PathBuf::from);
    let cfg = SynthConfig::desk(0);
    let ds = generate_dataset(&cfg)?;
    for e in ds.train.examples.iter().take(5) {
        println!("label {}  z ({:+.2}, {:+.2})  tokens {:?}", e.label, e.z[0], e.z[1], e.tokens);
    }

    let spec = MixtureSpec::default();
    let mut counts = vec![0usize; spec.components()];
    let mut agree = 0;
    for e in &ds.train.examples {
        counts[e.label] += 1;
        agree += usize::from(nearest_component(&spec, &e.z) == e.label);
    }
    println!("component counts: {counts:?}");
    println!(
        "nearest-component agreement: {:.3}",
        agree as f64 / ds.train.len() as f64
    );

    persist_dataset(&ds, &dir)?;
    assert_eq!(load_dataset(&dir)?, ds);
    println!("wrote and re-read {}", dir.display());
    Ok(())
}
