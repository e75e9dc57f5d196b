//! IAF checks against quadrature and dense Jacobians.

use duvae::eval::verify::{log_abs_det, numeric_jacobian, random_chain};
use duvae::flows::{flow_entropy_mc, mpd_invariance_check, InvarianceStatus};
use duvae::latent::DiagGaussian;
use duvae::numcore::{seeded_rng, Tensor};

/// `E_{z~N(m, diag v)}[log|det ∂f/∂z|]` for a two-dimensional flow by the
/// midpoint rule on a product grid.
fn expected_log_det_2d(chain: &duvae::flows::IafChain, m: [f64; 2], v: [f64; 2]) -> f64 {
    let (steps, half) = (400, 8.0);
    let h = 2.0 * half / steps as f64;
    let us: Vec<f64> = (0..steps).map(|i| -half + (i as f64 + 0.5) * h).collect();
    let phi = |u: f64| (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut zs = Vec::with_capacity(2 * steps * steps);
    let mut w = Vec::with_capacity(steps * steps);
    for &a in &us {
        for &b in &us {
            zs.push(m[0] + v[0].sqrt() * a);
            zs.push(m[1] + v[1].sqrt() * b);
            w.push(phi(a) * phi(b) * h * h);
        }
    }
    let out = chain.transform(&Tensor::matrix(steps * steps, 2, zs), None).unwrap();
    out.log_det.iter().zip(&w).map(|(ld, w)| ld * w).sum()
}

#[test]
fn entropy_change_matches_quadrature() {
    let mut rng = seeded_rng(300, 0);
    for _ in 0..5 {
        let chain = random_chain(2, 0, &mut rng).unwrap();
        let base = DiagGaussian::new(vec![0.4, -0.3], vec![0.7, 1.2]).unwrap();
        let exact = expected_log_det_2d(&chain, [0.4, -0.3], [0.7, 1.2]);
        let mc = flow_entropy_mc(&chain, &base, None, 50_000, &mut rng).unwrap();
        let diff = mc.h_zt - mc.h_z0;
        assert!(mc.stderr > 0.0);
        assert!((diff - exact).abs() <= 4.0 * mc.stderr, "{diff} vs {exact} ± {}", mc.stderr);
        assert!(mc.decreased());
    }
}

#[test]
fn log_det_matches_dense_jacobian() {
    let mut rng = seeded_rng(301, 0);
    for k in 0..20 {
        let n = 1 + k % 4;
        let chain = random_chain(n, 0, &mut rng).unwrap();
        let z0: Vec<f64> = (0..n).map(|i| 0.3 * i as f64 - 0.5).collect();
        let taped = chain.transform(&Tensor::row(z0.clone()), None).unwrap().log_det[0];
        let dense = log_abs_det(numeric_jacobian(&chain, &z0).unwrap());
        assert!((taped - dense).abs() <= 1e-4 * dense.abs().max(1e-8), "{taped} vs {dense}");
    }
}

#[test]
fn jacobian_is_lower_triangular_in_flow_order() {
    // each output depends only on inputs earlier in the autoregressive order
    let mut rng = seeded_rng(302, 0);
    let chain = random_chain(3, 0, &mut rng).unwrap();
    let block = duvae::flows::IafChain::new(
        3,
        &duvae::flows::IafConfig {
            blocks: 1,
            hidden: vec![8],
            init_scale: 0.7,
            ..Default::default()
        },
        &mut rng,
    )
    .unwrap();
    let jac = numeric_jacobian(&block, &[0.1, -0.2, 0.3]).unwrap();
    for r in 0..3 {
        for c in r + 1..3 {
            assert!(jac[r][c].abs() < 1e-9, "J[{r}][{c}] = {}", jac[r][c]);
        }
    }
    // the two-block chain alternates orders, so it is dense
    let dense = numeric_jacobian(&chain, &[0.1, -0.2, 0.3]).unwrap();
    assert!(dense[0][2].abs() > 1e-6 || dense[2][0].abs() > 1e-6);
}

#[test]
fn symmetric_kl_is_invariant_without_context() {
    let mut rng = seeded_rng(303, 0);
    for _ in 0..5 {
        let chain = random_chain(2, 0, &mut rng).unwrap();
        let q1 = DiagGaussian::new(vec![0.5, -0.3], vec![0.4, 0.9]).unwrap();
        let q2 = DiagGaussian::new(vec![-0.2, 0.6], vec![0.8, 0.5]).unwrap();
        let r = mpd_invariance_check(&chain, &q1, &q2, 20_000, &mut rng).unwrap();
        assert_eq!(r.status, InvarianceStatus::Checked { within: true }, "{r:?}");
    }
    let ctx_chain = random_chain(2, 3, &mut rng).unwrap();
    let q = DiagGaussian::standard(2);
    let r = mpd_invariance_check(&ctx_chain, &q, &q, 20_000, &mut rng).unwrap();
    assert_eq!(r.status, InvarianceStatus::NotApplicable);
}
