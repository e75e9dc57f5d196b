use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::rng::uniform_tensor;
use crate::numcore::{log_sum_exp, sigmoid, RngStream, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub hidden: usize,
    pub embedding: usize,
    pub vocab: usize,
    pub seq_len: usize,
    /// Half-width of the uniform init for the recurrent part, embeddings and
    /// the code-to-state map.
    pub recurrent_init: f64,
    /// Half-width of the uniform init for the output layer.
    pub output_init: f64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            hidden: 100,
            embedding: 100,
            vocab: 1000,
            seq_len: 10,
            recurrent_init: 1.0,
            output_init: 5.0,
        }
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.embedding == 0 || self.vocab == 0 || self.seq_len == 0 {
            return Err(Error::InvalidInput("generator sizes must all be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Frozen LSTM language model conditioned on a latent code.
///
/// The code sets the initial hidden state through an affine map, and the
/// output layer reads `[h_t ; z]`. The first input is a dedicated
/// begin-of-sequence embedding.
#[derive(Clone, Debug)]
pub struct SequenceGenerator {
    spec: GeneratorSpec,
    dim: usize,
    embed: Tensor,
    wx: Tensor,
    wh: Tensor,
    b: Tensor,
    init_w: Tensor,
    init_b: Tensor,
    out_w: Tensor,
    out_b: Tensor,
}

fn add_row(m: &mut Tensor, row: &Tensor) {
    let r = row.data();
    let c = r.len();
    for (i, v) in m.data_mut().iter_mut().enumerate() {
        *v += r[i % c];
    }
}

impl SequenceGenerator {
    pub fn new(spec: &GeneratorSpec, dim: usize, rng: &mut RngStream) -> Self {
        let (h, e, v) = (spec.hidden, spec.embedding, spec.vocab);
        let r = spec.recurrent_init;
        let o = spec.output_init;
        SequenceGenerator {
            spec: spec.clone(),
            dim,
            embed: uniform_tensor(rng, v + 1, e, -r, r),
            wx: uniform_tensor(rng, e, 4 * h, -r, r),
            wh: uniform_tensor(rng, h, 4 * h, -r, r),
            b: uniform_tensor(rng, 1, 4 * h, -r, r),
            init_w: uniform_tensor(rng, dim, h, -r, r),
            init_b: uniform_tensor(rng, 1, h, -r, r),
            out_w: uniform_tensor(rng, h + dim, v, -o, o),
            out_b: uniform_tensor(rng, 1, v, -o, o),
        }
    }

    pub fn spec(&self) -> &GeneratorSpec {
        &self.spec
    }

    /// Samples one sequence per row of `z`; row `i` draws its tokens from
    /// `stream(i)`, so each sequence depends only on its own code and stream.
    pub fn generate(&self, z: &Tensor, stream: impl Fn(usize) -> RngStream) -> Result<Vec<Vec<usize>>> {
        let (rows, n) = z.dims2();
        if n != self.dim {
            return Err(Error::shape("generate_sequences", format!("{n}-dim codes for a {}-dim generator", self.dim)));
        }
        let (hid, vocab) = (self.spec.hidden, self.spec.vocab);
        let mut rngs: Vec<RngStream> = (0..rows).map(&stream).collect();
        let mut h = z.matmul(&self.init_w)?;
        add_row(&mut h, &self.init_b);
        let mut c = Tensor::zeros(&[rows, hid]);
        let mut prev = vec![vocab; rows];
        let mut out = vec![Vec::with_capacity(self.spec.seq_len); rows];
        for _ in 0..self.spec.seq_len {
            let x = Tensor::from_rows(&prev.iter().map(|&t| self.embed.row_slice(t).to_vec()).collect::<Vec<_>>())?;
            let mut pre = x.matmul(&self.wx)?;
            let rec = h.matmul(&self.wh)?;
            for (p, r) in pre.data_mut().iter_mut().zip(rec.data()) {
                *p += r;
            }
            add_row(&mut pre, &self.b);
            for r in 0..rows {
                for u in 0..hid {
                    let i = sigmoid(pre.get(r, u));
                    let f = sigmoid(pre.get(r, hid + u));
                    let g = pre.get(r, 2 * hid + u).tanh();
                    let o = sigmoid(pre.get(r, 3 * hid + u));
                    let cell = f * c.get(r, u) + i * g;
                    c.set(r, u, cell);
                    h.set(r, u, o * cell.tanh());
                }
            }
            let feats: Vec<Vec<f64>> = (0..rows).map(|r| [h.row_slice(r), z.row_slice(r)].concat()).collect();
            let mut logits = Tensor::from_rows(&feats)?.matmul(&self.out_w)?;
            add_row(&mut logits, &self.out_b);
            for r in 0..rows {
                let tok = sample_softmax(logits.row_slice(r), &mut rngs[r]);
                out[r].push(tok);
                prev[r] = tok;
            }
        }
        Ok(out)
    }
}

fn sample_softmax(logits: &[f64], rng: &mut RngStream) -> usize {
    let lse = log_sum_exp(logits);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, l) in logits.iter().enumerate() {
        acc += (l - lse).exp();
        if u < acc {
            return k;
        }
    }
    // rounding can leave the cumulative mass a hair under one
    logits.len() - 1
}
