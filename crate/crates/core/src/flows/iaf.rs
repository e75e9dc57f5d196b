use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nets::{made_masks, Linear, MaskedLinear, Module, INIT_SCALE};
use crate::numcore::{sigmoid, Graph, Parameter, RngStream, Tensor, Var};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IafConfig {
    pub blocks: usize,
    pub hidden: Vec<usize>,
    /// Width of the encoder context fed to every conditioner; 0 disables it.
    pub context: usize,
    /// Initial bias of the gate pre-activation `s`, so `δ ≈ σ(s_bias)` at start.
    pub s_bias_init: f64,
    pub init_scale: f64,
}

impl Default for IafConfig {
    fn default() -> Self {
        IafConfig {
            blocks: 2,
            hidden: vec![64, 64],
            context: 0,
            s_bias_init: 1.5,
            init_scale: INIT_SCALE,
        }
    }
}

/// One autoregressive affine block.
#[derive(Clone, Debug)]
pub struct IafBlock {
    order: Vec<usize>,
    pub hidden: Vec<MaskedLinear>,
    pub out_m: MaskedLinear,
    pub out_s: MaskedLinear,
    pub context: Option<Linear>,
}

impl IafBlock {
    pub fn new(name: &str, n: usize, cfg: &IafConfig, reverse: bool, rng: &mut RngStream) -> Result<Self> {
        let masks = made_masks(n, &cfg.hidden, reverse)?;
        let sc = cfg.init_scale;
        let masked = |label: String, mask: &Tensor, rng: &mut RngStream| {
            let (r, c) = mask.dims2();
            MaskedLinear::new(Linear::with_scale(&label, r, c, sc, rng), mask.clone())
        };
        let hidden = masks
            .hidden
            .iter()
            .enumerate()
            .map(|(i, m)| masked(format!("{name}.h{i}"), m, rng))
            .collect::<Result<Vec<_>>>()?;
        let out_m = masked(format!("{name}.m"), &masks.output, rng)?;
        let mut out_s = masked(format!("{name}.s"), &masks.output, rng)?;
        out_s.linear.bias.value.data_mut().iter_mut().for_each(|b| *b += cfg.s_bias_init);
        let context = (cfg.context > 0).then(|| Linear::with_scale(&format!("{name}.ctx"), cfg.context, cfg.hidden[0], sc, rng));
        Ok(IafBlock {
            order: masks.order,
            hidden,
            out_m,
            out_s,
            context,
        })
    }

    pub fn dim(&self) -> usize {
        self.order.len()
    }

    /// Autoregressive degree of each coordinate.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// `(m, s)` for input `z` and optional context `h`.
    pub fn conditioner(&self, g: &Graph, z: Var, h: Option<Var>) -> Result<(Var, Var)> {
        let mut a = z;
        for (i, layer) in self.hidden.iter().enumerate() {
            let mut pre = layer.forward(g, a)?;
            if i == 0 {
                match (&self.context, h) {
                    (Some(ctx), Some(h)) => pre = g.add(pre, ctx.forward(g, h)?)?,
                    (Some(_), None) => return Err(Error::Precondition("flow expects an encoder context".into())),
                    _ => {}
                }
            }
            a = g.tanh(pre);
        }
        Ok((self.out_m.forward(g, a)?, self.out_s.forward(g, a)?))
    }

    /// Returns the transformed code and `log δ` (`B × n`).
    pub fn forward(&self, g: &Graph, z: Var, h: Option<Var>) -> Result<(Var, Var, Var)> {
        let (m, s) = self.conditioner(g, z, h)?;
        let delta = g.sigmoid(s);
        let one_minus = g.sigmoid(g.neg(s));
        let out = g.add(g.mul(delta, z)?, g.mul(one_minus, m)?)?;
        Ok((out, g.log_sigmoid(s), delta))
    }
}

impl Module for IafBlock {
    fn parameters(&self) -> Vec<&Parameter> {
        let mut out: Vec<&Parameter> = self.hidden.iter().flat_map(|l| l.parameters()).collect();
        out.extend(self.out_m.parameters());
        out.extend(self.out_s.parameters());
        if let Some(c) = &self.context {
            out.extend(c.parameters());
        }
        out
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        let mut out: Vec<&mut Parameter> = self.hidden.iter_mut().flat_map(|l| l.parameters_mut()).collect();
        out.extend(self.out_m.parameters_mut());
        out.extend(self.out_s.parameters_mut());
        if let Some(c) = &mut self.context {
            out.extend(c.parameters_mut());
        }
        out
    }
}

/// A stack of blocks with alternating orderings.
#[derive(Clone, Debug)]
pub struct IafChain {
    pub blocks: Vec<IafBlock>,
    context: usize,
}

/// Graph handles produced by [`IafChain::forward`].
#[derive(Clone, Debug)]
pub struct FlowOutput {
    pub z: Var,
    /// `B × 1`.
    pub log_det: Var,
    /// `Σ_t log δ_t`, per coordinate (`B × n`).
    pub log_delta: Var,
    pub deltas: Vec<Var>,
}

/// Plain-tensor result of pushing a batch through the chain.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowSample {
    pub z0: Tensor,
    pub z_t: Tensor,
    pub log_det: Vec<f64>,
    pub deltas: Vec<Tensor>,
}

impl IafChain {
    pub fn new(n: usize, cfg: &IafConfig, rng: &mut RngStream) -> Result<Self> {
        if cfg.blocks == 0 {
            return Err(Error::InvalidInput("a flow needs at least one block".into()));
        }
        let blocks = (0..cfg.blocks)
            .map(|t| IafBlock::new(&format!("iaf{t}"), n, cfg, t % 2 == 1, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(IafChain {
            blocks,
            context: cfg.context,
        })
    }

    pub fn dim(&self) -> usize {
        self.blocks[0].dim()
    }

    pub fn uses_context(&self) -> bool {
        self.context > 0
    }

    pub fn context_width(&self) -> usize {
        self.context
    }

    /// Every gate saturates at `δ = 1`, so the chain is the identity map.
    pub fn set_identity(&mut self) {
        self.set_constant_gates(40.0, 0.0);
    }

    /// Makes every block the constant affine map with gate logit `s` and
    /// shift `m`, independent of the input.
    pub fn set_constant_gates(&mut self, s: f64, m: f64) {
        for b in &mut self.blocks {
            for (layer, v) in [(&mut b.out_s, s), (&mut b.out_m, m)] {
                layer.linear.weight.value.data_mut().iter_mut().for_each(|w| *w = 0.0);
                layer.linear.bias.value.data_mut().iter_mut().for_each(|w| *w = v);
            }
        }
    }

    pub fn forward(&self, g: &Graph, z0: Var, h: Option<Var>) -> Result<FlowOutput> {
        let (rows, n) = g.shape(z0);
        if n != self.dim() {
            return Err(Error::shape("iaf_forward", format!("{n} columns for a {}-dim flow", self.dim())));
        }
        let mut z = z0;
        let mut log_delta = g.constant(Tensor::zeros(&[rows, n]));
        let mut deltas = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let (next, ld, delta) = b.forward(g, z, h)?;
            log_delta = g.add(log_delta, ld)?;
            deltas.push(delta);
            z = next;
        }
        let log_det = g.sum_axis(log_delta, 1)?;
        Ok(FlowOutput {
            z,
            log_det,
            log_delta,
            deltas,
        })
    }

    fn context_var(&self, g: &Graph, rows: usize, ctx: Option<&Tensor>) -> Result<Option<Var>> {
        match (self.uses_context(), ctx) {
            (false, _) => Ok(None),
            (true, None) => Err(Error::Precondition("flow expects an encoder context".into())),
            (true, Some(c)) if c.rows() == rows => Ok(Some(g.constant(c.clone()))),
            (true, Some(c)) if c.rows() == 1 => {
                let data = c.data().repeat(rows);
                Ok(Some(g.constant(Tensor::matrix(rows, c.cols(), data))))
            }
            (true, Some(c)) => Err(Error::shape("iaf_context", format!("{} context rows for {rows}", c.rows()))),
        }
    }

    /// Pushes a batch through the chain without recording gradients.
    pub fn transform(&self, z0: &Tensor, ctx: Option<&Tensor>) -> Result<FlowSample> {
        let g = Graph::new();
        let h = self.context_var(&g, z0.rows(), ctx)?;
        let out = self.forward(&g, g.constant(z0.clone()), h)?;
        let z_t = g.value(out.z).clone();
        let log_det = g.value(out.log_det).data().to_vec();
        let deltas = out.deltas.iter().map(|&d| g.value(d).clone()).collect();
        Ok(FlowSample {
            z0: z0.clone(),
            z_t,
            log_det,
            deltas,
        })
    }

    /// Inverts the chain by solving each block one degree at a time.
    pub fn inverse(&self, z_t: &Tensor, ctx: Option<&Tensor>) -> Result<Tensor> {
        let (rows, n) = z_t.dims2();
        if n != self.dim() {
            return Err(Error::shape("iaf_inverse", format!("{n} columns for a {}-dim flow", self.dim())));
        }
        let mut y = z_t.clone();
        for b in self.blocks.iter().rev() {
            let mut x = y.clone();
            for degree in 1..=n {
                let g = Graph::new();
                let h = self.context_var(&g, rows, ctx)?;
                let (m, s) = b.conditioner(&g, g.constant(x.clone()), h)?;
                let (m, s) = (g.value(m).clone(), g.value(s).clone());
                for d in (0..n).filter(|&d| b.order[d] == degree) {
                    for r in 0..rows {
                        let sv = s.get(r, d);
                        let (delta, rest) = (sigmoid(sv), sigmoid(-sv));
                        x.set(r, d, (y.get(r, d) - rest * m.get(r, d)) / delta);
                    }
                }
            }
            y = x;
        }
        Ok(y)
    }
}

impl Module for IafChain {
    fn parameters(&self) -> Vec<&Parameter> {
        self.blocks.iter().flat_map(|b| b.parameters()).collect()
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        self.blocks.iter_mut().flat_map(|b| b.parameters_mut()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::gradcheck::check_gradients;
    use crate::numcore::rng::uniform_tensor;
    use crate::numcore::seeded_rng;

    fn random_chain(n: usize, context: usize, seed: u64) -> IafChain {
        let cfg = IafConfig {
            blocks: 2,
            hidden: vec![12],
            context,
            s_bias_init: 0.5,
            init_scale: 0.7,
        };
        IafChain::new(n, &cfg, &mut seeded_rng(seed, 0)).unwrap()
    }

    fn log_abs_det(mut a: Vec<Vec<f64>>) -> f64 {
        let n = a.len();
        let mut acc = 0.0;
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
            a.swap(c, p);
            let pivot = a[c][c];
            acc += pivot.abs().ln();
            for r in c + 1..n {
                let f = a[r][c] / pivot;
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
        acc
    }

    #[test]
    fn log_det_matches_numeric_jacobian() {
        let n = 3;
        let chain = random_chain(n, 0, 11);
        let z0 = vec![0.4, -0.9, 1.3];
        let fwd = |z: &[f64]| chain.transform(&Tensor::row(z.to_vec()), None).unwrap();
        let base = fwd(&z0);
        let h = 1e-6;
        let mut jac = vec![vec![0.0; n]; n];
        for j in 0..n {
            let (mut p, mut m) = (z0.clone(), z0.clone());
            p[j] += h;
            m[j] -= h;
            let (fp, fm) = (fwd(&p).z_t, fwd(&m).z_t);
            for (i, row) in jac.iter_mut().enumerate() {
                row[j] = (fp.data()[i] - fm.data()[i]) / (2.0 * h);
            }
        }
        assert!((log_abs_det(jac) - base.log_det[0]).abs() < 1e-7);
    }

    #[test]
    fn inverse_round_trips() {
        for ctx_width in [0usize, 3] {
            let chain = random_chain(4, ctx_width, 2);
            let mut rng = seeded_rng(3, 0);
            let z0 = uniform_tensor(&mut rng, 6, 4, -2.0, 2.0);
            let ctx = (ctx_width > 0).then(|| uniform_tensor(&mut rng, 6, ctx_width, -1.0, 1.0));
            let fwd = chain.transform(&z0, ctx.as_ref()).unwrap();
            let back = chain.inverse(&fwd.z_t, ctx.as_ref()).unwrap();
            for (a, b) in back.data().iter().zip(z0.data()) {
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn identity_limit() {
        let mut chain = random_chain(3, 0, 5);
        chain.set_identity();
        let z0 = Tensor::matrix(2, 3, vec![0.1, -2.0, 3.0, 0.0, 0.5, -0.5]);
        let out = chain.transform(&z0, None).unwrap();
        assert_eq!(out.z_t, z0);
        assert!(out.log_det.iter().all(|l| l.abs() < 1e-15));
    }

    #[test]
    fn constant_half_gate() {
        let mut chain = random_chain(1, 0, 6);
        chain.blocks.truncate(1);
        chain.set_constant_gates(0.0, 0.0);
        let out = chain.transform(&Tensor::matrix(2, 1, vec![2.0, -1.0]), None).unwrap();
        assert_eq!(out.z_t.data(), &[1.0, -0.5]);
        for l in out.log_det {
            assert!((l + std::f64::consts::LN_2).abs() < 1e-15);
        }
    }

    #[test]
    fn gradient_through_chain() {
        let chain = random_chain(3, 2, 7);
        let mut rng = seeded_rng(8, 0);
        let z = uniform_tensor(&mut rng, 2, 3, -1.0, 1.0);
        let h = uniform_tensor(&mut rng, 2, 2, -1.0, 1.0);
        let r = check_gradients(&[z, h], |g, v| {
            let out = chain.forward(g, v[0], Some(v[1]))?;
            Ok(g.add(g.sum(g.square(out.z)), g.sum(out.log_det))?)
        })
        .unwrap();
        assert!(r.passes(1e-6), "{r:?}");
    }

    #[test]
    fn missing_context_is_rejected() {
        let chain = random_chain(2, 3, 1);
        assert!(chain.transform(&Tensor::row(vec![0.0, 0.0]), None).is_err());
    }

    #[test]
    fn orderings_alternate() {
        let chain = random_chain(3, 0, 1);
        assert_eq!(chain.blocks[0].order(), &[1, 2, 3]);
        assert_eq!(chain.blocks[1].order(), &[3, 2, 1]);
    }
}
