use super::config::{TrainConfig, Variant};
use crate::error::{Error, Result};
use crate::flows::IafChain;
use crate::latent::{PosteriorBatch, LOG_2PI};
use crate::nets::{Embedding, Linear, LstmCell, LstmState, Module};
use crate::numcore::rng::normal_tensor;
use crate::numcore::{seeded_rng, Graph, Parameter, RngStream, Tensor, Var};
use crate::regularizers::{variance_from_raw, BnMode, MeanBatchNorm, VarianceDropout};

/// Random stream used for weight initialization.
pub(crate) const STREAM_INIT: u64 = 10;

/// LSTM encoder and LSTM decoder over fixed-length token sequences, with
/// the variant-specific transforms between them.
///
/// The decoder's initial state is an affine function of `z`, and `z` is
/// also appended to the token embedding at every step.
#[derive(Clone, Debug)]
pub struct SeqVae {
    pub variant: Variant,
    latent: usize,
    vocab: usize,
    seq_len: usize,
    alpha: f64,
    lambda_fb: f64,
    pub enc_embed: Embedding,
    pub enc_lstm: LstmCell,
    pub enc_head: Linear,
    pub dec_embed: Embedding,
    pub dec_init: Linear,
    pub dec_lstm: LstmCell,
    pub dec_out: Linear,
    pub bn: Option<MeanBatchNorm>,
    pub dropout: Option<VarianceDropout>,
    pub flow: Option<IafChain>,
}

/// Posterior parameters on a graph, after the variant transforms.
#[derive(Clone, Copy, Debug)]
pub struct Posterior {
    pub mu: Var,
    pub var: Var,
    pub ctx: Option<Var>,
}

/// Randomness consumed by one ELBO evaluation, drawn up front so a step can
/// be replayed exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct StepNoise {
    pub mask: Option<Tensor>,
    pub eps: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ElboParts {
    /// Mean `log p(x|z)` per sequence.
    pub recon: f64,
    /// Mean KL per sequence, before any free-bits floor.
    pub kl: f64,
    pub weight: f64,
    pub kl_per_dim: Vec<f64>,
    pub loss: f64,
}

#[derive(Clone, Debug)]
pub struct ElboOutput {
    pub loss: Var,
    pub parts: ElboParts,
}

impl SeqVae {
    pub fn new(cfg: &TrainConfig, vocab: usize, seq_len: usize) -> Result<Self> {
        cfg.validate()?;
        if vocab == 0 || seq_len == 0 {
            return Err(Error::InvalidInput("vocabulary and sequence length must be ≥ 1".into()));
        }
        let mut rng = seeded_rng(cfg.seed, STREAM_INIT);
        let (n, d) = (cfg.latent, &cfg.dims);
        let v = cfg.variant;
        let ctx = if v.uses_flow() { cfg.iaf.context } else { 0 };
        let enc_embed = Embedding::new("enc.embed", vocab, d.embedding, &mut rng);
        let enc_lstm = LstmCell::new("enc.lstm", d.embedding, d.enc_hidden, &mut rng);
        let enc_head = Linear::new("enc.head", d.enc_hidden, 2 * n + ctx, &mut rng);
        let dec_embed = Embedding::new("dec.embed", vocab + 1, d.embedding, &mut rng);
        let dec_init = Linear::new("dec.init", n, 2 * d.dec_hidden, &mut rng);
        let dec_lstm = LstmCell::new("dec.lstm", d.embedding + n, d.dec_hidden, &mut rng);
        let dec_out = Linear::new("dec.out", d.dec_hidden, vocab, &mut rng);
        let bn = v.uses_bn().then(|| {
            let mut bn = match cfg.bn_mode() {
                BnMode::FixedBetaAblation => MeanBatchNorm::fixed_beta(n, cfg.gamma, cfg.bn_beta),
                mode => MeanBatchNorm::new(n, cfg.gamma, mode),
            };
            bn.momentum = cfg.bn_momentum;
            bn.eps = cfg.bn_eps;
            bn
        });
        let dropout = if v.uses_dropout() {
            Some(VarianceDropout::new(cfg.p, cfg.alpha)?)
        } else {
            None
        };
        let flow = if v.uses_flow() {
            let iaf = crate::flows::IafConfig {
                context: ctx,
                ..cfg.iaf.clone()
            };
            Some(IafChain::new(n, &iaf, &mut rng)?)
        } else {
            None
        };
        Ok(SeqVae {
            variant: v,
            latent: n,
            vocab,
            seq_len,
            alpha: cfg.alpha,
            lambda_fb: if v.uses_free_bits() { cfg.lambda_fb } else { 0.0 },
            enc_embed,
            enc_lstm,
            enc_head,
            dec_embed,
            dec_init,
            dec_lstm,
            dec_out,
            bn,
            dropout,
            flow,
        })
    }

    pub fn latent(&self) -> usize {
        self.latent
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn lambda_fb(&self) -> f64 {
        self.lambda_fb
    }

    fn context_width(&self) -> usize {
        self.flow.as_ref().map_or(0, IafChain::context_width)
    }

    /// Representation width: `n`, or `2n` when a flow is present.
    pub fn representation_dim(&self) -> usize {
        if self.flow.is_some() {
            2 * self.latent
        } else {
            self.latent
        }
    }

    /// Every parameter, frozen ones included, in a fixed order.
    pub fn parameters(&self) -> Vec<&Parameter> {
        let mut out = Vec::new();
        out.extend(self.enc_embed.parameters());
        out.extend(self.enc_lstm.parameters());
        out.extend(self.enc_head.parameters());
        out.extend(self.dec_embed.parameters());
        out.extend(self.dec_init.parameters());
        out.extend(self.dec_lstm.parameters());
        out.extend(self.dec_out.parameters());
        if let Some(bn) = &self.bn {
            out.push(&bn.gamma);
            out.push(&bn.beta);
        }
        if let Some(f) = &self.flow {
            out.extend(f.parameters());
        }
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        let mut out = Vec::new();
        out.extend(self.enc_embed.parameters_mut());
        out.extend(self.enc_lstm.parameters_mut());
        out.extend(self.enc_head.parameters_mut());
        out.extend(self.dec_embed.parameters_mut());
        out.extend(self.dec_init.parameters_mut());
        out.extend(self.dec_lstm.parameters_mut());
        out.extend(self.dec_out.parameters_mut());
        if let Some(bn) = &mut self.bn {
            out.push(&mut bn.gamma);
            out.push(&mut bn.beta);
        }
        if let Some(f) = &mut self.flow {
            out.extend(f.parameters_mut());
        }
        out
    }

    /// The parameters the optimizer updates.
    pub fn trainable_mut(&mut self) -> Vec<&mut Parameter> {
        let frozen: Vec<String> = match &self.bn {
            Some(bn) if !bn.gamma_trainable() => vec![bn.gamma.name.clone()],
            Some(bn) if !bn.beta_trainable() => vec![bn.beta.name.clone()],
            _ => Vec::new(),
        };
        self.parameters_mut()
            .into_iter()
            .filter(|p| !frozen.contains(&p.name))
            .collect()
    }

    fn check_tokens(&self, tokens: &[Vec<usize>]) -> Result<()> {
        if tokens.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        for (i, seq) in tokens.iter().enumerate() {
            if seq.len() != self.seq_len {
                return Err(Error::shape(
                    "seq_vae",
                    format!("sequence {i} has length {}, expected {}", seq.len(), self.seq_len),
                ));
            }
            if let Some(t) = seq.iter().find(|&&t| t >= self.vocab) {
                return Err(Error::InvalidInput(format!("token {t} outside a vocabulary of {}", self.vocab)));
            }
        }
        Ok(())
    }

    fn column(tokens: &[Vec<usize>], t: usize) -> Vec<usize> {
        tokens.iter().map(|s| s[t]).collect()
    }

    /// Encoder outputs before any transform: `(μ, δ², context)`.
    pub fn encode_raw(&self, g: &Graph, tokens: &[Vec<usize>]) -> Result<(Var, Var, Option<Var>)> {
        self.check_tokens(tokens)?;
        let n = self.latent;
        let emb = self.enc_embed.bind(g);
        let cell = self.enc_lstm.bind(g);
        let mut state = self.enc_lstm.zero_state(g, tokens.len());
        for t in 0..self.seq_len {
            let x = g.gather_rows(emb, &Self::column(tokens, t))?;
            state = cell.step(g, x, state)?;
        }
        let head = self.enc_head.forward(g, state.h)?;
        let mu = g.slice_cols(head, 0, n)?;
        let var = variance_from_raw(g, g.slice_cols(head, n, 2 * n)?, self.alpha);
        let ctx = match self.context_width() {
            0 => None,
            c => Some(g.tanh(g.slice_cols(head, 2 * n, 2 * n + c)?)),
        };
        Ok((mu, var, ctx))
    }

    /// Training-mode posterior: batch statistics (updating the running
    /// averages) and the given dropout mask.
    pub fn posterior_train(&mut self, g: &Graph, tokens: &[Vec<usize>], mask: Option<&Tensor>) -> Result<Posterior> {
        let (mu, var, ctx) = self.encode_raw(g, tokens)?;
        let mu = match &mut self.bn {
            Some(bn) => bn.forward(g, mu, true)?,
            None => mu,
        };
        let var = match (&self.dropout, mask) {
            (Some(d), Some(m)) => d.apply_with_mask(g, var, m)?,
            _ => var,
        };
        Ok(Posterior { mu, var, ctx })
    }

    /// Evaluation-mode posterior: running statistics, no dropout.
    pub fn posterior_eval(&self, g: &Graph, tokens: &[Vec<usize>]) -> Result<Posterior> {
        let (mu, var, ctx) = self.encode_raw(g, tokens)?;
        let mu = match &self.bn {
            Some(bn) => bn.forward_eval(g, mu)?,
            None => mu,
        };
        Ok(Posterior { mu, var, ctx })
    }

    /// `log p(x | z)` per sequence (`B × 1`).
    pub fn decode_log_lik(&self, g: &Graph, z: Var, tokens: &[Vec<usize>]) -> Result<Var> {
        self.check_tokens(tokens)?;
        let h = self.dec_lstm.hidden();
        let init = self.dec_init.forward(g, z)?;
        let mut state = LstmState {
            h: g.tanh(g.slice_cols(init, 0, h)?),
            c: g.slice_cols(init, h, 2 * h)?,
        };
        let emb = self.dec_embed.bind(g);
        let cell = self.dec_lstm.bind(g);
        let out = self.dec_out.bind(g);
        let mut prev = vec![self.vocab; tokens.len()];
        let mut total: Option<Var> = None;
        for t in 0..self.seq_len {
            let x = g.concat_cols(&[g.gather_rows(emb, &prev)?, z])?;
            state = cell.step(g, x, state)?;
            let target = Self::column(tokens, t);
            let ll = g.log_softmax_pick(out.apply(g, state.h)?, &target)?;
            total = Some(match total {
                Some(acc) => g.add(acc, ll)?,
                None => ll,
            });
            prev = target;
        }
        Ok(total.expect("sequence length is at least one"))
    }

    /// Noise for a batch of `rows`. The dropout mask is only drawn in
    /// training mode.
    pub fn sample_noise(&self, rows: usize, rng: &mut RngStream, training: bool) -> StepNoise {
        let mask = match (&self.dropout, training) {
            (Some(d), true) => Some(d.sample_mask(rows, self.latent, rng)),
            _ => None,
        };
        StepNoise {
            mask,
            eps: normal_tensor(rng, rows, self.latent),
        }
    }

    /// Negative ELBO averaged over the batch, with KL weight `weight`.
    pub fn elbo(
        &mut self,
        g: &Graph,
        tokens: &[Vec<usize>],
        weight: f64,
        noise: &StepNoise,
        training: bool,
    ) -> Result<ElboOutput> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::Precondition(format!("KL weight {weight} outside [0, 1]")));
        }
        if noise.eps.dims2() != (tokens.len(), self.latent) {
            return Err(Error::shape("elbo", "noise does not match the batch"));
        }
        let post = if training {
            self.posterior_train(g, tokens, noise.mask.as_ref())?
        } else {
            self.posterior_eval(g, tokens)?
        };
        self.elbo_from_posterior(g, tokens, weight, noise, post)
    }

    fn elbo_from_posterior(
        &self,
        g: &Graph,
        tokens: &[Vec<usize>],
        weight: f64,
        noise: &StepNoise,
        post: Posterior,
    ) -> Result<ElboOutput> {
        let eps = g.constant(noise.eps.clone());
        let sd = g.sqrt(post.var)?;
        let z0 = g.add(post.mu, g.mul(sd, eps)?)?;
        let (z, kl_mat) = match &self.flow {
            None => {
                // ½(μ² + δ² − log δ² − 1)
                let inner = g.sub(g.add(g.square(post.mu), post.var)?, g.log(post.var)?)?;
                (z0, g.scale(g.add_scalar(inner, -1.0), 0.5))
            }
            Some(flow) => {
                let out = flow.forward(g, z0, post.ctx)?;
                // log q(z⁰) − Σ log δ − log p(zᵀ), per coordinate; the 2π terms cancel
                let log_q0 = g.scale(g.add(g.log(post.var)?, g.square(eps))?, -0.5);
                let log_p = g.scale(g.square(out.z), -0.5);
                (out.z, g.sub(g.sub(log_q0, out.log_delta)?, log_p)?)
            }
        };
        let kl_dim = g.mean_axis(kl_mat, 0)?;
        let kl_term = if self.lambda_fb > 0.0 {
            g.sum(g.clamp_min(kl_dim, self.lambda_fb))
        } else {
            g.sum(kl_dim)
        };
        let recon = g.mean(self.decode_log_lik(g, z, tokens)?);
        let loss = g.sub(g.scale(kl_term, weight), recon)?;
        let kl_per_dim = g.value(kl_dim).data().to_vec();
        let parts = ElboParts {
            recon: g.scalar_value(recon),
            kl: kl_per_dim.iter().sum(),
            weight,
            kl_per_dim,
            loss: g.scalar_value(loss),
        };
        Ok(ElboOutput { loss, parts })
    }

    /// Importance-weighted log-likelihood terms `log p(x, z_k) − log q(z_k | x)`
    /// for `k` draws per sequence, as a `B × k` matrix.
    pub fn log_weights(&self, tokens: &[Vec<usize>], k: usize, rng: &mut RngStream) -> Result<Tensor> {
        let b = tokens.len();
        let g = Graph::new();
        let post = self.posterior_eval(&g, tokens)?;
        let idx: Vec<usize> = (0..b).flat_map(|i| std::iter::repeat_n(i, k)).collect();
        let mu = g.gather_rows(post.mu, &idx)?;
        let var = g.gather_rows(post.var, &idx)?;
        let ctx = post.ctx.map(|c| g.gather_rows(c, &idx)).transpose()?;
        let eps_t = normal_tensor(rng, b * k, self.latent);
        let eps = g.constant(eps_t.clone());
        let z0 = g.add(mu, g.mul(g.sqrt(var)?, eps)?)?;
        let (z, log_det) = match &self.flow {
            Some(f) => {
                let out = f.forward(&g, z0, ctx)?;
                (out.z, Some(out.log_det))
            }
            None => (z0, None),
        };
        let rep_tokens: Vec<Vec<usize>> = idx.iter().map(|&i| tokens[i].clone()).collect();
        let ll = g.value(self.decode_log_lik(&g, z, &rep_tokens)?).clone();
        let zv = g.value(z).clone();
        let varv = g.value(var).clone();
        let ldv = log_det.map(|v| g.value(v).clone());
        let n = self.latent as f64;
        let mut w = Vec::with_capacity(b * k);
        for r in 0..b * k {
            let log_p: f64 = -0.5 * (n * LOG_2PI + zv.row_slice(r).iter().map(|x| x * x).sum::<f64>());
            let mut log_q: f64 = -0.5
                * varv
                    .row_slice(r)
                    .iter()
                    .zip(eps_t.row_slice(r))
                    .map(|(v, e)| LOG_2PI + v.ln() + e * e)
                    .sum::<f64>();
            if let Some(ld) = &ldv {
                log_q -= ld.data()[r];
            }
            w.push(ll.data()[r] + log_p - log_q);
        }
        Ok(Tensor::matrix(b, k, w))
    }

    /// Evaluation-mode posterior parameters (of `z⁰` for flow variants).
    pub fn posterior_batch(&self, tokens: &[Vec<usize>]) -> Result<PosteriorBatch> {
        let mut means = Vec::with_capacity(tokens.len() * self.latent);
        let mut vars = Vec::with_capacity(tokens.len() * self.latent);
        for chunk in tokens.chunks(EVAL_CHUNK) {
            let g = Graph::new();
            let post = self.posterior_eval(&g, chunk)?;
            means.extend_from_slice(g.value(post.mu).data());
            vars.extend_from_slice(g.value(post.var).data());
        }
        PosteriorBatch::new(self.latent, means, vars)
    }

    /// `μ̂` for classic variants; `[μ⁰ ; f(μ⁰)]` for flow variants.
    pub fn extract_representation(&self, tokens: &[Vec<usize>]) -> Result<Tensor> {
        let width = self.representation_dim();
        let mut data = Vec::with_capacity(tokens.len() * width);
        for chunk in tokens.chunks(EVAL_CHUNK) {
            let g = Graph::new();
            let post = self.posterior_eval(&g, chunk)?;
            let rep = match &self.flow {
                Some(f) => {
                    let out = f.forward(&g, post.mu, post.ctx)?;
                    g.concat_cols(&[post.mu, out.z])?
                }
                None => post.mu,
            };
            data.extend_from_slice(g.value(rep).data());
        }
        Ok(Tensor::matrix(tokens.len(), width, data))
    }
}

/// Rows per graph when evaluating a whole split.
pub(crate) const EVAL_CHUNK: usize = 250;
