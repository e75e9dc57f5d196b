use super::{Module, INIT_SCALE};
use crate::error::{Error, Result};
use crate::numcore::rng::uniform_tensor;
use crate::numcore::{Graph, Parameter, RngStream, Tensor, Var};

/// LSTM cell with gates packed as `[i | f | g | o]`.
#[derive(Clone, Debug)]
pub struct LstmCell {
    pub wx: Parameter,
    pub wh: Parameter,
    pub bias: Parameter,
    hidden: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct BoundLstm {
    wx: Var,
    wh: Var,
    bias: Var,
    hidden: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct LstmState {
    pub h: Var,
    pub c: Var,
}

impl LstmCell {
    pub fn new(name: &str, input: usize, hidden: usize, rng: &mut RngStream) -> Self {
        Self::with_scale(name, input, hidden, INIT_SCALE, rng)
    }

    pub fn with_scale(name: &str, input: usize, hidden: usize, scale: f64, rng: &mut RngStream) -> Self {
        LstmCell {
            wx: Parameter::new(format!("{name}.wx"), uniform_tensor(rng, input, 4 * hidden, -scale, scale)),
            wh: Parameter::new(format!("{name}.wh"), uniform_tensor(rng, hidden, 4 * hidden, -scale, scale)),
            bias: Parameter::new(format!("{name}.bias"), uniform_tensor(rng, 1, 4 * hidden, -scale, scale)),
            hidden,
        }
    }

    pub fn input(&self) -> usize {
        self.wx.value.rows()
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn bind(&self, g: &Graph) -> BoundLstm {
        BoundLstm {
            wx: g.param(&self.wx),
            wh: g.param(&self.wh),
            bias: g.param(&self.bias),
            hidden: self.hidden,
        }
    }

    /// All-zero state for a batch of `rows`.
    pub fn zero_state(&self, g: &Graph, rows: usize) -> LstmState {
        LstmState {
            h: g.constant(Tensor::zeros(&[rows, self.hidden])),
            c: g.constant(Tensor::zeros(&[rows, self.hidden])),
        }
    }
}

impl BoundLstm {
    pub fn step(&self, g: &Graph, x: Var, state: LstmState) -> Result<LstmState> {
        let (_, hw) = g.shape(state.h);
        if hw != self.hidden || g.shape(state.c).1 != self.hidden {
            return Err(Error::shape("lstm_step", format!("state width {hw} for hidden size {}", self.hidden)));
        }
        let pre = g.add(g.add(g.matmul(x, self.wx)?, g.matmul(state.h, self.wh)?)?, self.bias)?;
        let h = self.hidden;
        let i = g.sigmoid(g.slice_cols(pre, 0, h)?);
        let f = g.sigmoid(g.slice_cols(pre, h, 2 * h)?);
        let cand = g.tanh(g.slice_cols(pre, 2 * h, 3 * h)?);
        let o = g.sigmoid(g.slice_cols(pre, 3 * h, 4 * h)?);
        let c = g.add(g.mul(f, state.c)?, g.mul(i, cand)?)?;
        let h = g.mul(o, g.tanh(c))?;
        Ok(LstmState { h, c })
    }
}

impl Module for LstmCell {
    fn parameters(&self) -> Vec<&Parameter> {
        vec![&self.wx, &self.wh, &self.bias]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.wx, &mut self.wh, &mut self.bias]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::gradcheck::check_gradients;
    use crate::numcore::seeded_rng;

    fn sig(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    #[test]
    fn step_matches_scalar_oracle() {
        let mut rng = seeded_rng(4, 0);
        let cell = LstmCell::with_scale("c", 2, 3, 0.5, &mut rng);
        let x = [0.3, -0.7];
        let h0 = [0.1, -0.2, 0.05];
        let c0 = [0.4, 0.0, -0.3];
        let g = Graph::new();
        let b = cell.bind(&g);
        let s = b
            .step(
                &g,
                g.constant(Tensor::row(x.to_vec())),
                LstmState {
                    h: g.constant(Tensor::row(h0.to_vec())),
                    c: g.constant(Tensor::row(c0.to_vec())),
                },
            )
            .unwrap();
        let (h1, c1) = (g.value(s.h).clone(), g.value(s.c).clone());
        let pre = |k: usize| {
            let mut a = cell.bias.value.data()[k];
            for (j, xj) in x.iter().enumerate() {
                a += xj * cell.wx.value.get(j, k);
            }
            for (j, hj) in h0.iter().enumerate() {
                a += hj * cell.wh.value.get(j, k);
            }
            a
        };
        for u in 0..3 {
            let (i, f, gg, o) = (sig(pre(u)), sig(pre(3 + u)), pre(6 + u).tanh(), sig(pre(9 + u)));
            let c = f * c0[u] + i * gg;
            assert!((c1.data()[u] - c).abs() < 1e-14);
            assert!((h1.data()[u] - o * c.tanh()).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_weights_decay_state() {
        let mut rng = seeded_rng(0, 0);
        let mut cell = LstmCell::new("c", 1, 2, &mut rng);
        for p in cell.parameters_mut() {
            p.value.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        let g = Graph::new();
        let b = cell.bind(&g);
        let mut s = LstmState {
            h: g.constant(Tensor::row(vec![0.9, -0.9])),
            c: g.constant(Tensor::row(vec![3.0, -3.0])),
        };
        let x = g.constant(Tensor::row(vec![1.0]));
        for _ in 0..60 {
            s = b.step(&g, x, s).unwrap();
        }
        assert!(g.value(s.h).data().iter().all(|v| v.abs() < 1e-12));
        assert!(g.value(s.c).data().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn unrolled_gradient() {
        let mut rng = seeded_rng(5, 0);
        let cell = LstmCell::with_scale("c", 2, 3, 0.6, &mut rng);
        let xs = uniform_tensor(&mut rng, 2, 2, -1.0, 1.0);
        let r = check_gradients(&[xs], |g, v| {
            let b = cell.bind(g);
            let mut s = cell.zero_state(g, 2);
            for _ in 0..3 {
                s = b.step(g, v[0], s)?;
            }
            Ok(g.sum(g.square(s.h)))
        })
        .unwrap();
        assert!(r.passes(1e-6), "{r:?}");
    }

    #[test]
    fn state_width_checked() {
        let mut rng = seeded_rng(0, 0);
        let cell = LstmCell::new("c", 1, 2, &mut rng);
        let g = Graph::new();
        let b = cell.bind(&g);
        let bad = LstmState {
            h: g.constant(Tensor::row(vec![0.0; 3])),
            c: g.constant(Tensor::row(vec![0.0; 3])),
        };
        assert!(b.step(&g, g.constant(Tensor::row(vec![0.0])), bad).is_err());
    }
}
