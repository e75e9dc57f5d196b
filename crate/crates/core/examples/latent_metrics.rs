//! Latent-space metrics on three hand-built posterior populations: a
//! collapsed one, a diverse one, and one that is mutually collapsed without
//! matching the prior.
//!
//! ```text
//! cargo run --example latent_metrics
//! ```

use duvae::latent::{au, ce, collapse_diagnosis, kl_to_std, mi_estimate, mpd, PosteriorBatch};
use duvae::numcore::seeded_rng;

fn describe(name: &str, batch: &PosteriorBatch) -> duvae::Result<()> {
    let kl = (0..batch.len()).map(|i| kl_to_std(&batch.gaussian(i))).sum::<f64>() / batch.len() as f64;
    let mi = mi_estimate(batch, 4, &mut seeded_rng(0, 0))?;
    let units = au(&batch.means_tensor())?;
    let diag = collapse_diagnosis(batch, 1e-3);
    println!(
        "{name:<18} kl {kl:7.3}  mi {mi:6.3}  au {}  mpd {:8.3}  ce {:7.3}  prior-collapse {}  mutual-collapse {}",
        units.count,
        mpd(batch)?,
        ce(batch),
        diag.posterior_equals_prior,
        diag.posteriors_mutually_collapsed
    );
    Ok(())
}

fn main() -> duvae::Result<()> {
    let b = 64;
    let prior = PosteriorBatch::new(2, vec![0.0; 2 * b], vec![1.0; 2 * b])?;
    let diverse_means: Vec<f64> = (0..b)
        .flat_map(|i| {
            let t = i as f64 / b as f64 * std::f64::consts::TAU;
            [2.0 * t.cos(), 2.0 * t.sin()]
        })
        .collect();
    let diverse = PosteriorBatch::new(2, diverse_means, vec![0.1; 2 * b])?;
    let shifted = PosteriorBatch::new(2, [1.0, -1.0].repeat(b), vec![0.2; 2 * b])?;

    describe("collapsed", &prior)?;
    describe("diverse", &diverse)?;
    describe("identical, shifted", &shifted)?;
    Ok(())
}
