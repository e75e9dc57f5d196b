//! Self-check suite behind `dulab verify`: gradient checks, Monte-Carlo
//! comparisons for the closed forms, the dropout proposition sweep, the BN
//! rescale invariant and the flow checks.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::flows::{flow_entropy_mc, mpd_invariance_check, IafChain, IafConfig, InvarianceStatus};
use crate::latent::{
    ce, dropout_expectations, gaussian_entropy, kl_to_std, mpd, mpd_moment_decomposition, prop1_verify, sym_kl,
    DiagGaussian, PosteriorBatch, NOISE_FLOOR,
};
use crate::models::{SeqVae, TrainConfig, Variant};
use crate::numcore::gradcheck::{check_gradients, rel_error, GradCheck};
use crate::numcore::rng::{standard_normal, uniform_tensor};
use crate::numcore::{seeded_rng, Graph, RngStream, Tensor, Var};
use crate::regularizers::{BnMode, MeanBatchNorm};

pub const VERIFY_SCHEMA_VERSION: u32 = 1;
pub const GRAD_TOL: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub instances: usize,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Sample sizes for the suite; [`VerifySizes::default`] keeps a full run
/// under a minute on one core.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifySizes {
    pub grad_instances: usize,
    pub skl_pairs: usize,
    pub skl_samples: usize,
    pub dropout_cases: usize,
    pub dropout_draws: usize,
    pub prop1_batches: usize,
    pub bn_cycles: usize,
    pub flow_chains: usize,
    pub flow_samples: usize,
}

impl Default for VerifySizes {
    fn default() -> Self {
        VerifySizes {
            grad_instances: 5,
            skl_pairs: 20,
            skl_samples: 100_000,
            dropout_cases: 20,
            dropout_draws: 1_000_000,
            prop1_batches: 20,
            bn_cycles: 1000,
            flow_chains: 5,
            flow_samples: 20_000,
        }
    }
}

fn check(name: &str, passed: bool, instances: usize, detail: String) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        passed,
        instances,
        detail,
    }
}

type Primitive = (&'static str, fn(&Graph, &[Var]) -> Result<Var>);

/// Scalar-valued wrappers around every taped primitive. Inputs are two
/// `3 × 4` matrices and a `4 × 3` matrix, strictly positive where a
/// primitive needs it.
pub fn primitive_cases() -> Vec<Primitive> {
    vec![
        ("matmul", |g, v| Ok(g.sum(g.matmul(v[0], v[2])?))),
        ("add", |g, v| Ok(g.sum(g.square(g.add(v[0], v[1])?)))),
        ("sub", |g, v| Ok(g.sum(g.square(g.sub(v[0], v[1])?)))),
        ("mul", |g, v| Ok(g.sum(g.mul(v[0], v[1])?))),
        ("div", |g, v| Ok(g.sum(g.div(v[0], v[1])?))),
        ("exp", |g, v| Ok(g.sum(g.exp(v[0])))),
        ("log", |g, v| Ok(g.sum(g.log(v[1])?))),
        ("sigmoid", |g, v| Ok(g.sum(g.sigmoid(v[0])))),
        ("tanh", |g, v| Ok(g.sum(g.tanh(v[0])))),
        ("softplus", |g, v| Ok(g.sum(g.softplus(v[0])))),
        ("log_sigmoid", |g, v| Ok(g.sum(g.log_sigmoid(v[0])))),
        ("square", |g, v| Ok(g.sum(g.square(v[0])))),
        ("sqrt", |g, v| Ok(g.sum(g.sqrt(v[1])?))),
        ("scale_shift", |g, v| Ok(g.sum(g.square(g.add_scalar(g.scale(v[0], -1.7), 0.3))))),
        ("mean", |g, v| Ok(g.square(g.mean(v[0])))),
        ("sum_axis", |g, v| Ok(g.sum(g.square(g.sum_axis(v[0], 0)?)))),
        ("mean_axis", |g, v| Ok(g.sum(g.square(g.mean_axis(v[0], 1)?)))),
        ("logsumexp", |g, v| Ok(g.sum(g.logsumexp(v[0], Some(1))?))),
        ("concat_slice", |g, v| {
            let c = g.concat_cols(&[v[0], v[1]])?;
            Ok(g.sum(g.square(g.slice_cols(c, 2, 6)?)))
        }),
        ("gather_rows", |g, v| Ok(g.sum(g.square(g.gather_rows(v[0], &[2, 0, 2, 1])?)))),
        ("log_softmax_pick", |g, v| Ok(g.sum(g.log_softmax_pick(v[0], &[3, 0, 1])?))),
        ("neg", |g, v| Ok(g.sum(g.mul(g.neg(v[0]), v[1])?))),
    ]
}

/// Random inputs for [`primitive_cases`]; entries keep clear of the kinks
/// of `relu`-like ops and the second input is positive.
pub fn primitive_inputs(rng: &mut RngStream) -> Vec<Tensor> {
    vec![
        uniform_tensor(rng, 3, 4, -2.0, 2.0),
        uniform_tensor(rng, 3, 4, 0.3, 2.0),
        uniform_tensor(rng, 4, 3, -2.0, 2.0),
    ]
}

/// Tiny DU model whose loss is cheap to differentiate numerically.
pub fn tiny_model(variant: Variant, seed: u64) -> Result<(SeqVae, Vec<Vec<usize>>)> {
    let mut cfg = TrainConfig::for_variant(variant);
    cfg.dims.embedding = 4;
    cfg.dims.enc_hidden = 5;
    cfg.dims.dec_hidden = 5;
    cfg.iaf.hidden = vec![6];
    cfg.iaf.context = 3;
    cfg.seed = seed;
    let model = SeqVae::new(&cfg, 6, 3)?;
    let mut rng = seeded_rng(seed, 99);
    let tokens = (0..4).map(|_| (0..3).map(|_| rng.random_range(0..6)).collect()).collect();
    Ok((model, tokens))
}

/// Step of the five-point stencil in [`model_gradcheck`]. Model losses are
/// O(1)–O(10) while some coordinates have gradients near 1e-8, so a larger
/// step with a fourth-order stencil keeps roundoff below the signal.
pub const MODEL_FD_STEP: f64 = 1e-3;

/// Taped gradients of the training-mode loss against a five-point finite
/// difference, at most `per_param` coordinates per trainable tensor. The
/// noise (mask and `ε`) is drawn once and reused by every evaluation.
pub fn model_gradcheck(
    model: &mut SeqVae,
    tokens: &[Vec<usize>],
    weight: f64,
    per_param: usize,
    rng: &mut RngStream,
) -> Result<GradCheck> {
    let noise = model.sample_noise(tokens.len(), rng, true);
    let g = Graph::new();
    let out = model.elbo(&g, tokens, weight, &noise, true)?;
    let grads = g.backward(out.loss)?;
    let analytic: Vec<Tensor> = model
        .trainable_mut()
        .into_iter()
        .map(|p| {
            p.zero_grad();
            grads.accumulate_into(p);
            p.grad.clone()
        })
        .collect();
    let mut report = GradCheck {
        max_rel_error: 0.0,
        worst: (0, 0),
        checked: 0,
    };
    for (k, a) in analytic.iter().enumerate() {
        let len = a.len();
        let stride = (len / per_param.max(1)).max(1);
        for i in (0..len).step_by(stride).take(per_param) {
            let mut eval = |delta: f64| -> Result<f64> {
                let orig = model.trainable_mut()[k].value.data()[i];
                model.trainable_mut()[k].value.data_mut()[i] = orig + delta;
                let g = Graph::new();
                let v = model.elbo(&g, tokens, weight, &noise, true).map(|o| o.parts.loss);
                model.trainable_mut()[k].value.data_mut()[i] = orig;
                v
            };
            let h = MODEL_FD_STEP;
            let near = eval(h)? - eval(-h)?;
            let far = eval(2.0 * h)? - eval(-2.0 * h)?;
            let numeric = (8.0 * near - far) / (12.0 * h);
            let e = rel_error(a.data()[i], numeric);
            report.checked += 1;
            if e > report.max_rel_error {
                report.max_rel_error = e;
                report.worst = (k, i);
            }
        }
    }
    Ok(report)
}

fn gradient_checks(sizes: &VerifySizes, seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = seeded_rng(seed, 1);
    let mut worst = (0.0f64, "");
    let cases = primitive_cases();
    for _ in 0..sizes.grad_instances {
        let inputs = primitive_inputs(&mut rng);
        for (name, f) in &cases {
            let r = check_gradients(&inputs, f)?;
            if r.max_rel_error > worst.0 {
                worst = (r.max_rel_error, name);
            }
        }
    }
    let primitives = check(
        "gradients.primitives",
        worst.0 <= GRAD_TOL,
        sizes.grad_instances * cases.len(),
        format!("max relative error {:.3e} ({})", worst.0, worst.1),
    );

    let mut model_worst = 0.0f64;
    let mut count = 0;
    for (i, variant) in [Variant::Du, Variant::DuIaf].into_iter().enumerate() {
        for k in 0..sizes.grad_instances.div_ceil(2) {
            let (mut model, tokens) = tiny_model(variant, seed.wrapping_add((10 * i + k) as u64))?;
            let r = model_gradcheck(&mut model, &tokens, 0.7, 4, &mut rng)?;
            model_worst = model_worst.max(r.max_rel_error);
            count += 1;
        }
    }
    let full = check(
        "gradients.du_loss",
        model_worst <= GRAD_TOL,
        count,
        format!("max relative error {model_worst:.3e} with the dropout mask pinned"),
    );
    Ok(vec![primitives, full])
}

fn random_gaussian(rng: &mut RngStream, n: usize) -> DiagGaussian {
    let mean = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
    let var = (0..n).map(|_| rng.random_range(0.2..2.0)).collect();
    DiagGaussian::new(mean, var).expect("positive variances")
}

fn draw(q: &DiagGaussian, rng: &mut RngStream) -> Vec<f64> {
    q.mean()
        .iter()
        .zip(q.variance())
        .map(|(m, v)| m + v.sqrt() * standard_normal(rng))
        .collect()
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let c = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / c;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (c - 1.0);
    (m, (v / c).sqrt())
}

/// `KL(a ‖ b)` samples `log a(z) − log b(z)` with `z ~ a`.
fn directed_kl_samples(a: &DiagGaussian, b: &DiagGaussian, samples: usize, rng: &mut RngStream) -> Vec<f64> {
    (0..samples)
        .map(|_| {
            let z = draw(a, rng);
            a.log_density(&z) - b.log_density(&z)
        })
        .collect()
}

fn divergence_checks(sizes: &VerifySizes, seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = seeded_rng(seed, 2);
    let mut within = 0;
    let mut kl_within = 0;
    for _ in 0..sizes.skl_pairs {
        let (q1, q2) = (random_gaussian(&mut rng, 2), random_gaussian(&mut rng, 2));
        let (m12, s12) = mean_stderr(&directed_kl_samples(&q1, &q2, sizes.skl_samples, &mut rng));
        let (m21, s21) = mean_stderr(&directed_kl_samples(&q2, &q1, sizes.skl_samples, &mut rng));
        let mc = 0.5 * (m12 + m21);
        let se = 0.5 * (s12 * s12 + s21 * s21).sqrt();
        if (sym_kl(&q1, &q2)? - mc).abs() <= 3.0 * se {
            within += 1;
        }
        let prior = DiagGaussian::standard(2);
        let (m, s) = mean_stderr(&directed_kl_samples(&q1, &prior, sizes.skl_samples, &mut rng));
        if (kl_to_std(&q1) - m).abs() <= 3.0 * s {
            kl_within += 1;
        }
    }
    // 3σ agreement is expected in about 99.7% of cases
    let need = sizes.skl_pairs - sizes.skl_pairs.div_ceil(25);
    let skl = check(
        "oracle.sym_kl",
        within >= need,
        sizes.skl_pairs,
        format!("{within}/{} within 3 stderr of Monte Carlo", sizes.skl_pairs),
    );
    let kl = check(
        "oracle.kl_to_prior",
        kl_within >= need,
        sizes.skl_pairs,
        format!("{kl_within}/{} within 3 stderr of Monte Carlo", sizes.skl_pairs),
    );

    // MPD: pairwise definition vs moment decomposition, and one pair vs MC
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let b = random_batch(&mut rng, 32, 3, 0.1, 2.0);
        worst = worst.max(rel_error(mpd(&b)?, mpd_moment_decomposition(&b)?));
    }
    let mpd_check = check(
        "oracle.mpd_decomposition",
        worst <= 1e-9,
        10,
        format!("max relative gap {worst:.3e}"),
    );

    let mut ce_within = 0;
    let ce_cases = 10;
    for _ in 0..ce_cases {
        let b = random_batch(&mut rng, 8, 2, 0.1, 2.0);
        let per = sizes.skl_samples / b.len();
        let mut samples = Vec::with_capacity(per * b.len());
        for i in 0..b.len() {
            let q = b.gaussian(i);
            for _ in 0..per {
                samples.push(-q.log_density(&draw(&q, &mut rng)));
            }
        }
        let (m, s) = mean_stderr(&samples);
        if (ce(&b) - m).abs() <= 3.0 * s {
            ce_within += 1;
        }
    }
    let ce_check = check(
        "oracle.ce",
        ce_within >= ce_cases - 1,
        ce_cases,
        format!("{ce_within}/{ce_cases} within 3 stderr of Monte Carlo"),
    );
    Ok(vec![skl, kl, mpd_check, ce_check])
}

fn random_batch(rng: &mut RngStream, b: usize, n: usize, lo: f64, hi: f64) -> PosteriorBatch {
    let means = (0..b * n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let vars = (0..b * n).map(|_| rng.random_range(lo..hi)).collect();
    PosteriorBatch::new(n, means, vars).expect("valid batch")
}

fn dropout_checks(sizes: &VerifySizes, seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = seeded_rng(seed, 3);
    let alpha = NOISE_FLOOR;
    let mut worst = 0.0f64;
    for _ in 0..sizes.dropout_cases {
        let v = rng.random_range(alpha * 1.05..5.0);
        let p = rng.random_range(0.1..0.95);
        let e = dropout_expectations(v, p, alpha)?;
        let (mut inv, mut log) = (0.0, 0.0);
        for _ in 0..sizes.dropout_draws {
            let g = if rng.random_bool(p) { 1.0 / p } else { 0.0 };
            let x = g * (v - alpha) + alpha;
            inv += 1.0 / x;
            log += x.ln();
        }
        let c = sizes.dropout_draws as f64;
        worst = worst
            .max(rel_error(e.inv, inv / c))
            .max((e.log - log / c).abs() / e.log.abs().max(1.0));
    }
    let oracle = check(
        "oracle.dropout_expectations",
        worst <= 0.01,
        sizes.dropout_cases,
        format!("max relative error {worst:.3e}"),
    );

    let mut violations = 0;
    let ps: Vec<f64> = (1..20).map(|k| k as f64 * 0.05).collect();
    let vs: Vec<f64> = (1..=20).map(|k| alpha * (1.0 + 0.5 * k as f64)).collect();
    for &v in &vs {
        for w in ps.windows(2) {
            let (lo, hi) = (dropout_expectations(v, w[0], alpha)?, dropout_expectations(v, w[1], alpha)?);
            // more dropout (smaller p) means more mass at α
            if !(lo.inv > hi.inv && lo.log < hi.log) {
                violations += 1;
            }
        }
    }
    let mono = check(
        "dropout.monotone_in_p",
        violations == 0,
        vs.len() * (ps.len() - 1),
        format!("{violations} violations"),
    );
    Ok(vec![oracle, mono])
}

fn prop1_checks(sizes: &VerifySizes, seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = seeded_rng(seed, 4);
    let alpha = NOISE_FLOOR;
    let ps = [0.9, 0.7, 0.5, 0.3];
    let (mut violations, mut bound_violations, mut mv_worst) = (0, 0, 0.0f64);
    let mut count = 0;
    for k in 0..sizes.prop1_batches {
        let n = [2, 8, 32][k % 3];
        let b = random_batch(&mut rng, 64, n, alpha * 1.5, 3.0);
        let reports = ps.iter().map(|&p| prop1_verify(&b, p, alpha)).collect::<Result<Vec<_>>>()?;
        for r in &reports {
            count += 1;
            if !(r.mpd_increases() && r.ce_decreases()) {
                violations += 1;
            }
            if !r.bound_holds() {
                bound_violations += 1;
            }
        }
        // gaps grow as p shrinks
        for w in reports.windows(2) {
            if !(w[1].mpd_gap() > w[0].mpd_gap() && w[1].ce_gap() > w[0].ce_gap()) {
                violations += 1;
            }
        }
        // E[δ̂²] = δ² by Monte Carlo on one dimension of one row
        let v = b.variances()[0];
        let p = ps[k % ps.len()];
        let draws = 200_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            let g = if rng.random_bool(p) { 1.0 / p } else { 0.0 };
            acc += g * (v - alpha) + alpha;
        }
        mv_worst = mv_worst.max(rel_error(v, acc / draws as f64));
    }
    Ok(vec![
        check(
            "prop1.sweep",
            violations == 0 && mv_worst <= 0.01,
            count,
            format!("{violations} violations; mean-variance MC error {mv_worst:.3e}"),
        ),
        check(
            "prop1.mpd_bound",
            bound_violations == 0,
            count,
            format!("{bound_violations} violations of MPD_after > ((1-p)/alpha) sum Var[mu]"),
        ),
    ])
}

fn bn_check(sizes: &VerifySizes, seed: u64) -> Result<CheckResult> {
    let mut rng = seeded_rng(seed, 5);
    let target = rng.random_range(0.5..2.0);
    let mut bn = MeanBatchNorm::new(8, target, BnMode::DuRescale);
    let mut worst = 0.0f64;
    let mut idempotent = true;
    for _ in 0..sizes.bn_cycles {
        for x in bn.gamma.value.data_mut() {
            *x += rng.random_range(-0.3..0.3);
        }
        bn.rescale()?;
        worst = worst.max((bn.gamma_rms() - target).abs());
        let before = bn.gamma.value.clone();
        bn.rescale()?;
        idempotent &= before == bn.gamma.value;
    }
    Ok(check(
        "bn.rescale_invariant",
        worst <= 1e-9 && idempotent,
        sizes.bn_cycles,
        format!("max |rms(gamma) - target| {worst:.3e}; idempotent: {idempotent}"),
    ))
}

pub fn random_chain(n: usize, context: usize, rng: &mut RngStream) -> Result<IafChain> {
    let cfg = IafConfig {
        blocks: 2,
        hidden: vec![12],
        context,
        s_bias_init: 0.5,
        init_scale: 0.7,
    };
    IafChain::new(n, &cfg, rng)
}

/// `log |det A|` by partial-pivot elimination.
pub fn log_abs_det(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut acc = 0.0;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .expect("non-empty");
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

/// Central-difference Jacobian of the flow at `z0`.
pub fn numeric_jacobian(chain: &IafChain, z0: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = z0.len();
    let h = 1e-6;
    let mut jac = vec![vec![0.0; n]; n];
    for c in 0..n {
        let mut up = z0.to_vec();
        let mut down = z0.to_vec();
        up[c] += h;
        down[c] -= h;
        let fu = chain.transform(&Tensor::row(up), None)?.z_t;
        let fd = chain.transform(&Tensor::row(down), None)?.z_t;
        for (r, row) in jac.iter_mut().enumerate() {
            row[c] = (fu.data()[r] - fd.data()[r]) / (2.0 * h);
        }
    }
    Ok(jac)
}

fn flow_checks(sizes: &VerifySizes, seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = seeded_rng(seed, 6);
    let mut worst = 0.0f64;
    let chains = 2 * sizes.flow_chains;
    for k in 0..chains {
        let n = 1 + k % 4;
        let chain = random_chain(n, 0, &mut rng)?;
        let z0: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
        let taped = chain.transform(&Tensor::row(z0.clone()), None)?.log_det[0];
        worst = worst.max(rel_error(taped, log_abs_det(numeric_jacobian(&chain, &z0)?)));
    }
    let logdet = check(
        "flow.log_det",
        worst <= 1e-4,
        chains,
        format!("max relative error {worst:.3e} against the numeric Jacobian"),
    );

    let mut ordered = 0;
    let mut invariant = 0;
    for k in 0..sizes.flow_chains {
        let n = 2 + k % 3;
        let chain = random_chain(n, 0, &mut rng)?;
        let base = random_gaussian(&mut rng, n);
        let h = flow_entropy_mc(&chain, &base, None, sizes.flow_samples, &mut rng)?;
        debug_assert!((h.h_z0 - gaussian_entropy(&base)).abs() < 1e-12);
        if h.h_z0 - h.h_zt > 3.0 * h.stderr {
            ordered += 1;
        }
        let (q1, q2) = (random_gaussian(&mut rng, n), random_gaussian(&mut rng, n));
        let r = mpd_invariance_check(&chain, &q1, &q2, sizes.flow_samples, &mut rng)?;
        if r.status == (InvarianceStatus::Checked { within: true }) {
            invariant += 1;
        }
    }
    let c = sizes.flow_chains;
    Ok(vec![
        logdet,
        check(
            "flow.ce_ordering",
            ordered == c,
            c,
            format!("{ordered}/{c} chains with H(z_T) below H(z_0) by more than 3 stderr"),
        ),
        check(
            "flow.mpd_invariance",
            invariant + c.div_ceil(20) > c,
            c,
            format!("{invariant}/{c} chains with |SKL_T - SKL_0| within 3 stderr"),
        ),
    ])
}

fn noise_floor_check(seed: u64) -> Result<CheckResult> {
    let mut rng = seeded_rng(seed, 7);
    let mut negative = 0;
    let cases = 100;
    for _ in 0..cases {
        let b = random_batch(&mut rng, 16, 4, NOISE_FLOOR, 3.0);
        if ce(&b) < 0.0 {
            negative += 1;
        }
    }
    let at_floor = PosteriorBatch::new(3, vec![0.5; 30], vec![NOISE_FLOOR; 30])?;
    let zero = ce(&at_floor);
    Ok(check(
        "noise_floor.ce",
        negative == 0 && zero.abs() <= 1e-12,
        cases + 1,
        format!("{negative} negative CE values; CE at the floor {zero:.3e}"),
    ))
}

/// Runs every check with the default sizes.
pub fn run_verify(seed: u64) -> Result<VerifyReport> {
    run_verify_with(seed, &VerifySizes::default())
}

pub fn run_verify_with(seed: u64, sizes: &VerifySizes) -> Result<VerifyReport> {
    let mut checks = gradient_checks(sizes, seed)?;
    checks.extend(divergence_checks(sizes, seed)?);
    checks.extend(dropout_checks(sizes, seed)?);
    checks.extend(prop1_checks(sizes, seed)?);
    checks.push(bn_check(sizes, seed)?);
    checks.extend(flow_checks(sizes, seed)?);
    checks.push(noise_floor_check(seed)?);
    Ok(VerifyReport {
        schema_version: VERIFY_SCHEMA_VERSION,
        seed,
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}
