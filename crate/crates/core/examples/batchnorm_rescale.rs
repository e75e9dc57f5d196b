//! Mean batch-normalization with the scale kept at a fixed RMS, next to
//! the BN-VAE (frozen γ) and fixed-β configurations.
//!
//! ```text
//! cargo run --example batchnorm_rescale
//! ```

use duvae::numcore::rng::normal_tensor;
use duvae::numcore::{seeded_rng, Graph};
use duvae::regularizers::{BnMode, MeanBatchNorm};
use rand::Rng;

fn main() -> duvae::Result<()> {
    let mut rng = seeded_rng(3, 0);
    let mut bn = MeanBatchNorm::new(4, 1.0, BnMode::DuRescale);
    for step in 0..5 {
        // stand-in for an optimizer step on γ
        for g in bn.gamma.value.data_mut() {
            *g += rng.random_range(-0.5..0.5);
        }
        let before = bn.gamma_rms();
        bn.rescale()?;
        println!(
            "step {step}: rms before {before:.4}, after {:.12}, gamma {:.3?}",
            bn.gamma_rms(),
            bn.gamma.value.data()
        );
    }

    let mu = normal_tensor(&mut rng, 32, 4).map(|x| 3.0 * x + 1.0);
    let g = Graph::new();
    let out = bn.forward(&g, g.constant(mu), true)?;
    let v = g.value(out).clone();
    for d in 0..4 {
        let col: Vec<f64> = (0..32).map(|r| v.get(r, d)).collect();
        let mean = col.iter().sum::<f64>() / 32.0;
        let var = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 32.0;
        println!(
            "dim {d}: batch mean {mean:+.4} (beta {:+.4}), batch std {:.4} (|gamma| {:.4})",
            bn.beta.value.data()[d],
            var.sqrt(),
            bn.gamma.value.data()[d].abs()
        );
    }

    let frozen = MeanBatchNorm::new(4, 0.6, BnMode::BnvaeFixedGamma);
    let fixed_beta = MeanBatchNorm::fixed_beta(4, 1.0, 0.5);
    println!(
        "bnvae: gamma trainable {}, beta trainable {}; fixed-beta: gamma trainable {}, beta trainable {}",
        frozen.gamma_trainable(),
        frozen.beta_trainable(),
        fixed_beta.gamma_trainable(),
        fixed_beta.beta_trainable()
    );
    Ok(())
}
