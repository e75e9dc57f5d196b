use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{Graph, Parameter, Tensor, Var};

pub const DEFAULT_BN_EPS: f64 = 1e-5;
pub const DEFAULT_BN_MOMENTUM: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BnMode {
    /// Learnable γ renormalized after every step so `mean_d γ_d² = γ²`.
    DuRescale,
    /// γ frozen at the target; only β learns.
    BnvaeFixedGamma,
    /// β frozen at a nonzero constant; γ learns freely.
    FixedBetaAblation,
}

impl std::str::FromStr for BnMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "du-rescale" => Ok(BnMode::DuRescale),
            "bnvae-fixed-gamma" => Ok(BnMode::BnvaeFixedGamma),
            "fixed-beta-ablation" => Ok(BnMode::FixedBetaAblation),
            other => Err(Error::Config(format!("unknown bn.mode {other:?}"))),
        }
    }
}

/// Batch normalization applied to posterior means.
#[derive(Clone, Debug)]
pub struct MeanBatchNorm {
    pub gamma_target: f64,
    pub gamma: Parameter,
    pub beta: Parameter,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
    pub mode: BnMode,
}

impl MeanBatchNorm {
    /// γ starts at `gamma_target` in every dimension, β at zero.
    pub fn new(n: usize, gamma_target: f64, mode: BnMode) -> Self {
        MeanBatchNorm {
            gamma_target,
            gamma: Parameter::new("bn.gamma", Tensor::full(&[1, n], gamma_target)),
            beta: Parameter::new("bn.beta", Tensor::zeros(&[1, n])),
            running_mean: vec![0.0; n],
            running_var: vec![1.0; n],
            momentum: DEFAULT_BN_MOMENTUM,
            eps: DEFAULT_BN_EPS,
            mode,
        }
    }

    /// β frozen at `beta` in every dimension, γ free.
    pub fn fixed_beta(n: usize, gamma_init: f64, beta: f64) -> Self {
        let mut bn = Self::new(n, gamma_init, BnMode::FixedBetaAblation);
        bn.beta.value = Tensor::full(&[1, n], beta);
        bn
    }

    pub fn dim(&self) -> usize {
        self.gamma.value.len()
    }

    pub fn gamma_trainable(&self) -> bool {
        self.mode != BnMode::BnvaeFixedGamma
    }

    pub fn beta_trainable(&self) -> bool {
        self.mode != BnMode::FixedBetaAblation
    }

    /// Parameters the optimizer should update.
    pub fn trainable_mut(&mut self) -> Vec<&mut Parameter> {
        let (tg, tb) = (self.gamma_trainable(), self.beta_trainable());
        let mut out = Vec::new();
        if tg {
            out.push(&mut self.gamma);
        }
        if tb {
            out.push(&mut self.beta);
        }
        out
    }

    /// `√(mean_d γ_d²)`.
    pub fn gamma_rms(&self) -> f64 {
        let g = self.gamma.value.data();
        (g.iter().map(|x| x * x).sum::<f64>() / g.len() as f64).sqrt()
    }

    fn bind(&self, g: &Graph) -> (Var, Var) {
        let gamma = if self.gamma_trainable() {
            g.param(&self.gamma)
        } else {
            g.constant(self.gamma.value.clone())
        };
        let beta = if self.beta_trainable() {
            g.param(&self.beta)
        } else {
            g.constant(self.beta.value.clone())
        };
        (gamma, beta)
    }

    /// Training normalizes with batch statistics and updates the running
    /// averages; evaluation uses the running averages.
    pub fn forward(&mut self, g: &Graph, mu: Var, training: bool) -> Result<Var> {
        let (b, n) = g.shape(mu);
        if n != self.dim() {
            return Err(Error::shape("bn_forward", format!("{n} columns for a {}-dim layer", self.dim())));
        }
        if !training {
            return self.forward_eval(g, mu);
        }
        let (gamma, beta) = self.bind(g);
        if b < 2 {
            return Err(Error::InsufficientData { needed: 2, got: b });
        }
        let mean = g.mean_axis(mu, 0)?;
        let centered = g.sub(mu, mean)?;
        let var = g.mean_axis(g.square(centered), 0)?;
        let std = g.sqrt(g.add_scalar(var, self.eps))?;
        let norm = g.div(centered, std)?;
        let out = g.add(g.mul(norm, gamma)?, beta)?;

        let batch_mean = g.value(mean).data().to_vec();
        let unbiased = b as f64 / (b as f64 - 1.0);
        let batch_var: Vec<f64> = g.value(var).data().iter().map(|v| v * unbiased).collect();
        for d in 0..n {
            self.running_mean[d] = (1.0 - self.momentum) * self.running_mean[d] + self.momentum * batch_mean[d];
            self.running_var[d] = (1.0 - self.momentum) * self.running_var[d] + self.momentum * batch_var[d];
        }
        Ok(out)
    }

    /// Normalizes with the running statistics; leaves the layer untouched.
    pub fn forward_eval(&self, g: &Graph, mu: Var) -> Result<Var> {
        let n = g.shape(mu).1;
        if n != self.dim() {
            return Err(Error::shape("bn_forward", format!("{n} columns for a {}-dim layer", self.dim())));
        }
        let (gamma, beta) = self.bind(g);
        let mean = g.constant(Tensor::row(self.running_mean.clone()));
        let inv_std = g.constant(Tensor::row(
            self.running_var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect(),
        ));
        let norm = g.mul(g.sub(mu, mean)?, inv_std)?;
        g.add(g.mul(norm, gamma)?, beta)
    }

    /// Multiplies every γ_d by `γ_target / √(mean_d γ_d²)`. A factor within
    /// a few ulps of one is skipped, so rescaling twice changes nothing.
    pub fn rescale(&mut self) -> Result<()> {
        if self.mode != BnMode::DuRescale {
            return Err(Error::Precondition(format!("rescale requires du-rescale mode, not {:?}", self.mode)));
        }
        let rms = self.gamma_rms();
        if rms == 0.0 {
            return Err(Error::DegenerateScale);
        }
        let k = self.gamma_target / rms;
        if (k - 1.0).abs() <= 8.0 * f64::EPSILON {
            return Ok(());
        }
        self.gamma.value.data_mut().iter_mut().for_each(|x| *x *= k);
        Ok(())
    }
}
