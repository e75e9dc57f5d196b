use super::{Linear, Module};
use crate::error::{Error, Result};
use crate::numcore::{Graph, Parameter, RngStream, Tensor, Var};

/// Connectivity masks for a MADE network with sequential degrees.
///
/// Input `d` has degree `order[d] ∈ 1..=n`. Hidden unit `k` has degree
/// `k mod (n − 1) + 1` (or 0 when `n = 1`), a hidden unit sees inputs of
/// degree at most its own, and output `d` sees hidden units of degree
/// strictly below `order[d]`. Output `d` therefore depends only on inputs
/// that precede it in the ordering.
#[derive(Clone, Debug, PartialEq)]
pub struct MadeMasks {
    pub order: Vec<usize>,
    /// One `prev × next` mask per hidden layer.
    pub hidden: Vec<Tensor>,
    /// `last_hidden × n`.
    pub output: Tensor,
}

pub fn made_masks(n: usize, hidden_widths: &[usize], reverse: bool) -> Result<MadeMasks> {
    if n == 0 {
        return Err(Error::InvalidInput("MADE needs at least one input".into()));
    }
    if hidden_widths.is_empty() || hidden_widths.contains(&0) {
        return Err(Error::InvalidInput("MADE needs non-empty hidden layers".into()));
    }
    let order: Vec<usize> = if reverse { (1..=n).rev().collect() } else { (1..=n).collect() };
    let hidden_degree = |k: usize| if n == 1 { 0 } else { k % (n - 1) + 1 };

    let mut prev: Vec<usize> = order.clone();
    let mut hidden = Vec::with_capacity(hidden_widths.len());
    for &w in hidden_widths {
        let next: Vec<usize> = (0..w).map(hidden_degree).collect();
        let mut m = Tensor::zeros(&[prev.len(), w]);
        for (j, &dj) in prev.iter().enumerate() {
            for (k, &dk) in next.iter().enumerate() {
                if dk >= dj {
                    m.set(j, k, 1.0);
                }
            }
        }
        hidden.push(m);
        prev = next;
    }
    let mut output = Tensor::zeros(&[prev.len(), n]);
    for (k, &dk) in prev.iter().enumerate() {
        for (d, &od) in order.iter().enumerate() {
            if od > dk {
                output.set(k, d, 1.0);
            }
        }
    }
    Ok(MadeMasks { order, hidden, output })
}

/// Linear layer whose weight is multiplied elementwise by a fixed mask.
#[derive(Clone, Debug)]
pub struct MaskedLinear {
    pub linear: Linear,
    pub mask: Tensor,
}

#[derive(Clone, Copy, Debug)]
pub struct BoundMaskedLinear {
    weight: Var,
    bias: Var,
}

impl MaskedLinear {
    pub fn new(linear: Linear, mask: Tensor) -> Result<Self> {
        if linear.weight.value.dims2() != mask.dims2() {
            return Err(Error::shape(
                "masked_linear",
                format!("mask {:?} for weight {:?}", mask.shape(), linear.weight.value.shape()),
            ));
        }
        Ok(MaskedLinear { linear, mask })
    }

    pub fn from_rng(name: &str, mask: Tensor, rng: &mut RngStream) -> Self {
        let (r, c) = mask.dims2();
        MaskedLinear {
            linear: Linear::new(name, r, c, rng),
            mask,
        }
    }

    pub fn bind(&self, g: &Graph) -> Result<BoundMaskedLinear> {
        let w = g.param(&self.linear.weight);
        let m = g.constant(self.mask.clone());
        Ok(BoundMaskedLinear {
            weight: g.mul(w, m)?,
            bias: g.param(&self.linear.bias),
        })
    }

    pub fn forward(&self, g: &Graph, x: Var) -> Result<Var> {
        self.bind(g)?.apply(g, x)
    }
}

impl BoundMaskedLinear {
    pub fn apply(&self, g: &Graph, x: Var) -> Result<Var> {
        g.add(g.matmul(x, self.weight)?, self.bias)
    }
}

impl Module for MaskedLinear {
    fn parameters(&self) -> Vec<&Parameter> {
        self.linear.parameters()
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        self.linear.parameters_mut()
    }
}
