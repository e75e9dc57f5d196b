//! Training, checkpoints and importance-weighted evaluation on a small
//! synthetic dataset.

use duvae::models::{
    format_metric_log, iw_nll, train, validation_loss, Checkpoint, TrainConfig, Variant,
};
use duvae::numcore::seeded_rng;
use duvae::synth::{generate_dataset, GeneratorSpec, SynthConfig, SynthDataset};

fn data(seed: u64) -> SynthDataset {
    generate_dataset(&SynthConfig {
        generator: GeneratorSpec {
            vocab: 40,
            hidden: 16,
            embedding: 8,
            seq_len: 6,
            ..GeneratorSpec::default()
        },
        sizes: [300, 60, 60],
        ..SynthConfig::desk(seed)
    })
    .unwrap()
}

fn cfg(variant: Variant, epochs: usize) -> TrainConfig {
    let mut cfg = TrainConfig::for_variant(variant);
    cfg.dims.embedding = 8;
    cfg.dims.enc_hidden = 16;
    cfg.dims.dec_hidden = 16;
    cfg.iaf.hidden = vec![16];
    cfg.iaf.context = 4;
    cfg.max_epochs = epochs;
    cfg
}

#[test]
fn every_variant_trains_and_reports_finite_metrics() {
    let ds = data(500);
    for v in Variant::ALL {
        let out = train(&cfg(v, 2), &ds).unwrap();
        assert_eq!(out.log.len(), 2);
        for e in &out.log {
            assert!(e.train_loss.is_finite() && e.val_loss.is_finite() && e.kl.is_finite(), "{v}: {e:?}");
            assert!(e.mi >= 0.0 && e.au <= 2, "{v}: {e:?}");
        }
        assert_eq!(out.log[0].gamma_rms.is_some(), v.uses_bn());
    }
}

#[test]
fn du_keeps_gamma_at_target() {
    let ds = data(501);
    let mut c = cfg(Variant::Du, 3);
    c.gamma = 0.8;
    let out = train(&c, &ds).unwrap();
    for e in &out.log {
        assert!((e.gamma_rms.unwrap() - 0.8).abs() < 1e-9, "{e:?}");
    }
}

#[test]
fn training_is_deterministic() {
    let ds = data(502);
    for v in [Variant::Du, Variant::DuIaf] {
        let a = train(&cfg(v, 2), &ds).unwrap();
        let b = train(&cfg(v, 2), &ds).unwrap();
        assert_eq!(format_metric_log(&a.log), format_metric_log(&b.log));
        let ja = Checkpoint::capture(&a.model, &cfg(v, 2), Some(&a.state)).to_json().unwrap();
        let jb = Checkpoint::capture(&b.model, &cfg(v, 2), Some(&b.state)).to_json().unwrap();
        assert_eq!(ja, jb);
    }
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let ds = data(503);
    for v in [Variant::Du, Variant::Bn, Variant::DuIaf] {
        let c = cfg(v, 1);
        let out = train(&c, &ds).unwrap();
        let json = Checkpoint::capture(&out.model, &c, Some(&out.state)).to_json().unwrap();
        let back = Checkpoint::from_json(&json).unwrap();
        assert_eq!(back.to_json().unwrap(), json);
        let model = back.restore().unwrap();
        let tokens = ds.test.all_tokens();
        assert_eq!(
            model.posterior_batch(&tokens).unwrap(),
            out.model.posterior_batch(&tokens).unwrap()
        );
        let wa = model.log_weights(&tokens[..5], 3, &mut seeded_rng(1, 0)).unwrap();
        let wb = out.model.log_weights(&tokens[..5], 3, &mut seeded_rng(1, 0)).unwrap();
        assert_eq!(wa, wb);
    }
}

#[test]
fn checkpoint_rejects_foreign_files() {
    assert!(Checkpoint::from_json("{\"format\": \"other\"}").is_err());
    let ds = data(504);
    let c = cfg(Variant::Vanilla, 1);
    let out = train(&c, &ds).unwrap();
    let mut ck = Checkpoint::capture(&out.model, &c, None);
    ck.version += 1;
    assert!(ck.restore().is_err());
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt())
}

#[test]
fn importance_weighting_tightens_the_bound() {
    let ds = data(505);
    let mut model = train(&cfg(Variant::Du, 3), &ds).unwrap().model;
    let tokens = ds.test.all_tokens();
    let reps = |k: usize| -> Vec<f64> {
        (0..8)
            .map(|r| iw_nll(&model, &tokens, k, &mut seeded_rng(506, (k * 100 + r) as u64)).unwrap().nll)
            .collect()
    };
    let (m1, s1) = mean_sd(&reps(1));
    let (m5, s5) = mean_sd(&reps(5));
    let (m50, s50) = mean_sd(&reps(50));
    assert!(m50 <= m5 + 3.0 * (s5 * s5 + s50 * s50).sqrt() / 8f64.sqrt(), "{m50} vs {m5}");
    assert!(m5 <= m1 + 3.0 * (s1 * s1 + s5 * s5).sqrt() / 8f64.sqrt(), "{m5} vs {m1}");
    assert!(m50 < m1);

    // one importance sample is the negative ELBO
    let iw1 = iw_nll(&model, &tokens, 1, &mut seeded_rng(507, 0)).unwrap();
    let (elbo, _) = validation_loss(&mut model, &ds.test, &mut seeded_rng(508, 0)).unwrap();
    let (_, sd) = mean_sd(&iw1.per_example);
    let se = sd * (2.0 / tokens.len() as f64).sqrt();
    assert!((iw1.nll - elbo).abs() <= 4.0 * se, "{} vs {elbo} ± {se}", iw1.nll);
}
