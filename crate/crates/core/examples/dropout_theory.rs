//! Variance dropout in closed form: the expectations of `1/δ̂²` and
//! `log δ̂²`, and how MPD grows and CE shrinks as the keep probability
//! falls.
//!
//! ```text
//! cargo run --example dropout_theory
//! ```

use duvae::latent::{dropout_expectations, prop1_verify, PosteriorBatch, NOISE_FLOOR};
use duvae::numcore::seeded_rng;
use rand::Rng;

fn main() -> duvae::Result<()> {
    let alpha = NOISE_FLOOR;
    println!("noise floor alpha = 1/(2 pi e) = {alpha:.6}");
    println!("\nvariance 0.5:");
    println!("{:>5} {:>10} {:>10}", "p", "E[1/v]", "E[log v]");
    for p in [1.0, 0.9, 0.7, 0.5, 0.3] {
        let e = dropout_expectations(0.5, p, alpha)?;
        println!("{p:>5} {:>10.4} {:>10.4}", e.inv, e.log);
    }

    let mut rng = seeded_rng(7, 0);
    let (b, n) = (64, 8);
    let means = (0..b * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let vars = (0..b * n).map(|_| rng.random_range(0.1..1.0)).collect();
    let batch = PosteriorBatch::new(n, means, vars)?;
    println!("\nrandom batch, B = {b}, n = {n}:");
    println!(
        "{:>5} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "p", "MPD", "MPD gap", "bound", "CE", "CE gap"
    );
    for p in [0.9, 0.7, 0.5, 0.3] {
        let r = prop1_verify(&batch, p, alpha)?;
        println!(
            "{p:>5} {:>10.3} {:>10.3} {:>10.3} {:>10.3} {:>10.3}",
            r.mpd_after,
            r.mpd_gap(),
            r.eq8_bound,
            r.ce_after,
            r.ce_gap()
        );
        assert!(r.all_hold());
    }
    Ok(())
}
