//! Runs the verification suite with reduced sample sizes and prints one
//! line per check.
//!
//! ```text
//! cargo run --release --example verify_suite
//! ```

use duvae::eval::{run_verify_with, VerifySizes};

fn main() -> duvae::Result<()> {
    let sizes = VerifySizes {
        skl_samples: 20_000,
        dropout_draws: 200_000,
        flow_samples: 10_000,
        ..VerifySizes::default()
    };
    let report = run_verify_with(0, &sizes)?;
    for c in &report.checks {
        println!("{} {:<28} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("all passed: {}", report.passed);
    Ok(())
}
