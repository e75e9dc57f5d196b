//! Reverse-mode gradients against finite differences, for the primitives
//! and for the complete training losses with the dropout mask pinned.

use duvae::eval::verify::{model_gradcheck, primitive_cases, primitive_inputs, tiny_model};
use duvae::models::Variant;
use duvae::numcore::gradcheck::check_gradients;
use duvae::numcore::seeded_rng;

#[test]
fn primitives_match_central_differences() {
    let mut rng = seeded_rng(200, 0);
    for _ in 0..20 {
        let inputs = primitive_inputs(&mut rng);
        for (name, f) in primitive_cases() {
            let r = check_gradients(&inputs, f).unwrap();
            assert!(r.passes(1e-4), "{name}: {r:?}");
        }
    }
}

#[test]
fn du_loss_matches_finite_differences() {
    for seed in 0..20 {
        let (mut model, tokens) = tiny_model(Variant::Du, seed).unwrap();
        let r = model_gradcheck(&mut model, &tokens, 0.6, 4, &mut seeded_rng(seed, 201)).unwrap();
        assert!(r.passes(1e-4), "seed {seed}: {r:?}");
    }
}

#[test]
fn du_iaf_loss_matches_finite_differences() {
    for seed in 0..10 {
        let (mut model, tokens) = tiny_model(Variant::DuIaf, seed).unwrap();
        let r = model_gradcheck(&mut model, &tokens, 1.0, 4, &mut seeded_rng(seed, 202)).unwrap();
        assert!(r.passes(1e-4), "seed {seed}: {r:?}");
    }
}

#[test]
fn bn_vae_loss_matches_finite_differences() {
    for seed in 0..5 {
        let (mut model, tokens) = tiny_model(Variant::Bn, seed).unwrap();
        let r = model_gradcheck(&mut model, &tokens, 1.0, 4, &mut seeded_rng(seed, 203)).unwrap();
        assert!(r.passes(1e-4), "seed {seed}: {r:?}");
    }
}
