//! The reverse-mode tape on its own: one LSTM step and a loss, gradients
//! for the cell parameters, and a finite-difference check of an input.
//!
//! ```text
//! cargo run --example autodiff
//! ```

use duvae::nets::{made_masks, LstmCell, LstmState, Module};
use duvae::numcore::gradcheck::check_gradients;
use duvae::numcore::rng::normal_tensor;
use duvae::numcore::{seeded_rng, Graph};

fn main() -> duvae::Result<()> {
    let mut rng = seeded_rng(1, 0);
    let mut cell = LstmCell::new("cell", 3, 4, &mut rng);
    let x = normal_tensor(&mut rng, 2, 3);

    let g = Graph::new();
    let bound = cell.bind(&g);
    let state = bound.step(&g, g.constant(x.clone()), cell.zero_state(&g, 2))?;
    let loss = g.sum(g.square(state.h));
    let grads = g.backward(loss)?;
    println!("loss {:.6}, tape length {}", g.scalar_value(loss), g.len());
    for p in cell.parameters_mut() {
        p.zero_grad();
        grads.accumulate_into(p);
        let norm = p.grad.data().iter().map(|v| v * v).sum::<f64>().sqrt();
        println!("  d loss / d {:<10} norm {norm:.6}", p.name);
    }

    let report = check_gradients(&[x], |g, v| {
        let bound = cell.bind(g);
        let LstmState { h, .. } = bound.step(g, v[0], cell.zero_state(g, 2))?;
        Ok(g.sum(g.square(h)))
    })?;
    println!(
        "input gradient vs central differences: max relative error {:.2e} over {} coordinates",
        report.max_rel_error, report.checked
    );

    let masks = made_masks(3, &[5], false)?;
    println!("MADE output mask (autoregressive, 3 inputs):\n{:?}", masks.output.to_rows());
    Ok(())
}
