use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::rng::uniform_tensor;
use crate::numcore::{seeded_rng, Graph, Parameter, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub classes: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            classes: 5,
            epochs: 500,
            lr: 0.1,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub final_loss: f64,
}

fn accuracy(x: &Tensor, y: &[usize], w: &Tensor, b: &Tensor) -> Result<f64> {
    let logits = x.matmul(w)?;
    let c = w.cols();
    let hits = (0..x.rows())
        .filter(|&r| {
            let row = logits.row_slice(r);
            let best = (0..c)
                .max_by(|&i, &j| (row[i] + b.data()[i]).total_cmp(&(row[j] + b.data()[j])))
                .unwrap_or(0);
            best == y[r]
        })
        .count();
    Ok(hits as f64 / x.rows() as f64)
}

/// Softmax regression trained by full-batch gradient descent on the train
/// features; accuracy reported on both splits.
pub fn linear_probe(
    train_x: &Tensor,
    train_y: &[usize],
    test_x: &Tensor,
    test_y: &[usize],
    cfg: &ProbeConfig,
) -> Result<ProbeResult> {
    if cfg.classes < 2 {
        return Err(Error::InvalidInput("a probe needs at least two classes".into()));
    }
    if train_x.rows() != train_y.len() || test_x.rows() != test_y.len() || train_x.cols() != test_x.cols() {
        return Err(Error::shape("linear_probe", "features and labels disagree"));
    }
    if let Some(&bad) = train_y.iter().chain(test_y).find(|&&l| l >= cfg.classes) {
        return Err(Error::InvalidInput(format!("label {bad} ≥ classes {}", cfg.classes)));
    }
    let first = train_y.first().copied();
    if train_y.iter().all(|&l| Some(l) == first) {
        return Err(Error::InsufficientData { needed: 2, got: 1 });
    }
    let mut rng = seeded_rng(cfg.seed, 0);
    let d = train_x.cols();
    let mut w = Parameter::new("probe.weight", uniform_tensor(&mut rng, d, cfg.classes, -0.01, 0.01));
    let mut b = Parameter::new("probe.bias", Tensor::zeros(&[1, cfg.classes]));
    let mut final_loss = f64::NAN;
    for _ in 0..cfg.epochs {
        let g = Graph::new();
        let x = g.constant(train_x.clone());
        let logits = g.add(g.matmul(x, g.param(&w))?, g.param(&b))?;
        let loss = g.neg(g.mean(g.log_softmax_pick(logits, train_y)?));
        final_loss = g.scalar_value(loss);
        let grads = g.backward(loss)?;
        for p in [&mut w, &mut b] {
            p.zero_grad();
            grads.accumulate_into(p);
            let grad = p.grad.data().to_vec();
            p.value.data_mut().iter_mut().zip(grad).for_each(|(v, g)| *v -= cfg.lr * g);
        }
    }
    Ok(ProbeResult {
        train_accuracy: accuracy(train_x, train_y, &w.value, &b.value)?,
        test_accuracy: accuracy(test_x, test_y, &w.value, &b.value)?,
        final_loss,
    })
}
