//! Writes a posterior dump file, reads it back and computes the full
//! metric report on it, including the closed-form dropout effect.
//!
//! ```text
//! cargo run --example posterior_dump
//! ```

use duvae::eval::dump_metrics;
use duvae::latent::dump::{read_posterior_dump, write_posterior_dump};
use duvae::latent::{PosteriorBatch, NOISE_FLOOR};
use duvae::numcore::seeded_rng;
use rand::Rng;

fn main() -> duvae::Result<()> {
    let mut rng = seeded_rng(11, 0);
    let (b, n) = (200, 2);
    let means = (0..b * n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let vars = (0..b * n).map(|_| rng.random_range(0.1..0.9)).collect();
    let batch = PosteriorBatch::new(n, means, vars)?;

    let path = std::env::temp_dir().join("duvae-posteriors.txt");
    write_posterior_dump(&batch, &path)?;
    let back = read_posterior_dump(&path)?;
    assert_eq!(back, batch);

    let report = dump_metrics(&back, Some((0.5, NOISE_FLOOR)), 4, 0)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
