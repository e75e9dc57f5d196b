//! Importance-weighted NLL for several sample counts on a briefly trained
//! model. More samples give a tighter bound; one sample is the ELBO.
//!
//! ```text
//! cargo run --release --example iw_bound
//! ```

use duvae::models::{iw_nll, train, validation_loss, TrainConfig, Variant};
use duvae::numcore::seeded_rng;
use duvae::synth::{generate_dataset, SynthConfig};

fn main() -> duvae::Result<()> {
    let mut data = SynthConfig::desk(0);
    data.sizes = [1000, 200, 200];
    let ds = generate_dataset(&data)?;
    let mut cfg = TrainConfig::for_variant(Variant::Du);
    cfg.max_epochs = 5;
    let mut model = train(&cfg, &ds)?.model;

    let tokens = ds.test.all_tokens();
    let (neg_elbo, _) = validation_loss(&mut model, &ds.test, &mut seeded_rng(1, 0))?;
    println!("negative ELBO: {neg_elbo:.4}");
    for k in [1, 5, 50, 500] {
        let est = iw_nll(&model, &tokens, k, &mut seeded_rng(2, k as u64))?;
        println!("IW-NLL, K = {k:>3}: {:.4}", est.nll);
    }
    Ok(())
}
