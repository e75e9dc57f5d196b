use serde::{Deserialize, Serialize};

use super::{Module, INIT_SCALE};
use crate::error::{Error, Result};
use crate::numcore::rng::uniform_tensor;
use crate::numcore::{Graph, Parameter, RngStream, Tensor, Var};

/// Affine map `x·W + b` with `W` stored `in × out`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: Parameter,
    pub bias: Parameter,
}

#[derive(Clone, Copy, Debug)]
pub struct BoundLinear {
    pub weight: Var,
    pub bias: Var,
}

impl Linear {
    pub fn new(name: &str, n_in: usize, n_out: usize, rng: &mut RngStream) -> Self {
        Self::with_scale(name, n_in, n_out, INIT_SCALE, rng)
    }

    /// Weights and biases uniform in `[-scale, scale]`.
    pub fn with_scale(name: &str, n_in: usize, n_out: usize, scale: f64, rng: &mut RngStream) -> Self {
        Linear {
            weight: Parameter::new(format!("{name}.weight"), uniform_tensor(rng, n_in, n_out, -scale, scale)),
            bias: Parameter::new(format!("{name}.bias"), uniform_tensor(rng, 1, n_out, -scale, scale)),
        }
    }

    pub fn n_in(&self) -> usize {
        self.weight.value.rows()
    }

    pub fn n_out(&self) -> usize {
        self.weight.value.cols()
    }

    pub fn bind(&self, g: &Graph) -> BoundLinear {
        BoundLinear {
            weight: g.param(&self.weight),
            bias: g.param(&self.bias),
        }
    }

    pub fn forward(&self, g: &Graph, x: Var) -> Result<Var> {
        self.bind(g).apply(g, x)
    }

    /// Plain evaluation without a tape.
    pub fn eval(&self, x: &Tensor) -> Result<Tensor> {
        let mut out = x.matmul(&self.weight.value)?;
        let b = self.bias.value.data();
        let n = b.len();
        for (i, v) in out.data_mut().iter_mut().enumerate() {
            *v += b[i % n];
        }
        Ok(out)
    }
}

impl BoundLinear {
    pub fn apply(&self, g: &Graph, x: Var) -> Result<Var> {
        g.add(g.matmul(x, self.weight)?, self.bias)
    }
}

impl Module for Linear {
    fn parameters(&self) -> Vec<&Parameter> {
        vec![&self.weight, &self.bias]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.weight, &mut self.bias]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
    Sigmoid,
    Softplus,
}

impl Activation {
    pub fn apply(self, g: &Graph, x: Var) -> Var {
        match self {
            Activation::Identity => x,
            Activation::Tanh => g.tanh(x),
            Activation::Relu => g.relu(x),
            Activation::Sigmoid => g.sigmoid(x),
            Activation::Softplus => g.softplus(x),
        }
    }
}

/// Stack of linear layers, each followed by its own activation.
#[derive(Clone, Debug)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub activations: Vec<Activation>,
}

impl Mlp {
    /// `widths = [in, h1, ..., out]`; hidden layers use `hidden`, the last
    /// layer `output`.
    pub fn new(
        name: &str,
        widths: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut RngStream,
    ) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::InvalidInput("an MLP needs at least input and output widths".into()));
        }
        let k = widths.len() - 1;
        let layers = (0..k)
            .map(|i| Linear::new(&format!("{name}.{i}"), widths[i], widths[i + 1], rng))
            .collect();
        let mut activations = vec![hidden; k];
        activations[k - 1] = output;
        Ok(Mlp { layers, activations })
    }

    pub fn forward(&self, g: &Graph, x: Var) -> Result<Var> {
        let mut h = x;
        for (layer, act) in self.layers.iter().zip(&self.activations) {
            h = act.apply(g, layer.forward(g, h)?);
        }
        Ok(h)
    }
}

impl Module for Mlp {
    fn parameters(&self) -> Vec<&Parameter> {
        self.layers.iter().flat_map(|l| l.parameters()).collect()
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        self.layers.iter_mut().flat_map(|l| l.parameters_mut()).collect()
    }
}

/// Token embedding table, `vocab × width`.
#[derive(Clone, Debug)]
pub struct Embedding {
    pub table: Parameter,
}

impl Embedding {
    pub fn new(name: &str, vocab: usize, width: usize, rng: &mut RngStream) -> Self {
        Embedding {
            table: Parameter::new(format!("{name}.table"), uniform_tensor(rng, vocab, width, -INIT_SCALE, INIT_SCALE)),
        }
    }

    pub fn vocab(&self) -> usize {
        self.table.value.rows()
    }

    pub fn width(&self) -> usize {
        self.table.value.cols()
    }

    pub fn bind(&self, g: &Graph) -> Var {
        g.param(&self.table)
    }
}

impl Module for Embedding {
    fn parameters(&self) -> Vec<&Parameter> {
        vec![&self.table]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.table]
    }
}
