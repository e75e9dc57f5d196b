use rand::Rng;

use crate::error::{Error, Result};
use crate::latent::NOISE_FLOOR;
use crate::numcore::{Graph, RngStream, Tensor, Var};

/// Raw log-variance outputs are clamped here before `exp`.
pub const RAW_CLAMP: f64 = 30.0;

/// `δ² = exp(raw) + α`, strictly above the noise floor.
pub fn variance_from_raw(g: &Graph, raw: Var, alpha: f64) -> Var {
    let e = g.exp(g.clamp_max(raw, RAW_CLAMP));
    g.add_scalar(e, alpha)
}

/// Dropout on posterior variances: `δ̂² = g·(δ² − α) + α` with
/// `g ∈ {0, 1/p}` and `P(g = 1/p) = p`, independently per coordinate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VarianceDropout {
    p: f64,
    alpha: f64,
}

impl VarianceDropout {
    pub fn new(p: f64, alpha: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::Precondition(format!("keep probability p = {p} outside (0, 1]")));
        }
        if !(alpha > 0.0) {
            return Err(Error::Precondition(format!("noise floor α = {alpha} must be positive")));
        }
        Ok(VarianceDropout { p, alpha })
    }

    pub fn with_default_floor(p: f64) -> Result<Self> {
        Self::new(p, NOISE_FLOOR)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Draws a `rows × cols` mask with entries in `{0, 1/p}`.
    pub fn sample_mask(&self, rows: usize, cols: usize, rng: &mut RngStream) -> Tensor {
        let keep = 1.0 / self.p;
        let data = (0..rows * cols)
            .map(|_| if self.p >= 1.0 || rng.random::<f64>() < self.p { keep } else { 0.0 })
            .collect();
        Tensor::matrix(rows, cols, data)
    }

    /// Applies a fixed mask. The mask is a constant, so gradients reach the
    /// variances only through the kept coordinates.
    pub fn apply_with_mask(&self, g: &Graph, variance: Var, mask: &Tensor) -> Result<Var> {
        {
            let v = g.value(variance);
            if v.dims2() != mask.dims2() {
                return Err(Error::shape(
                    "variance_dropout",
                    format!("mask {:?} vs variances {:?}", mask.shape(), v.shape()),
                ));
            }
            if let Some(bad) = v.data().iter().find(|&&x| !(x > self.alpha)) {
                return Err(Error::Precondition(format!(
                    "variance {bad} must exceed the noise floor {} during training",
                    self.alpha
                )));
            }
        }
        let centered = g.add_scalar(variance, -self.alpha);
        let m = g.constant(mask.clone());
        let dropped = g.mul(centered, m)?;
        Ok(g.add_scalar(dropped, self.alpha))
    }
}

/// Training: resample a mask and apply it. Evaluation: identity.
pub fn apply_variance_dropout(
    g: &Graph,
    variance: Var,
    vd: &VarianceDropout,
    rng: &mut RngStream,
    training: bool,
) -> Result<Var> {
    if !training {
        return Ok(variance);
    }
    let (r, c) = g.shape(variance);
    let mask = vd.sample_mask(r, c, rng);
    vd.apply_with_mask(g, variance, &mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::gradcheck::check_gradients;
    use crate::numcore::seeded_rng;

    #[test]
    fn raw_underflow_lands_on_floor() {
        let g = Graph::new();
        let raw = g.constant(Tensor::row(vec![-40.0, 0.0, 1e6]));
        let v = g.value(variance_from_raw(&g, raw, NOISE_FLOOR)).clone();
        assert!((v.data()[0] - NOISE_FLOOR).abs() < 1e-15);
        assert!(v.data()[0] > NOISE_FLOOR);
        assert!((v.data()[1] - (1.0 + NOISE_FLOOR)).abs() < 1e-15);
        assert!(v.data()[2].is_finite());
    }

    #[test]
    fn variance_head_gradient() {
        let x = Tensor::matrix(2, 3, vec![-1.0, 0.3, 2.0, -0.5, 0.0, 1.2]);
        let r = check_gradients(&[x], |g, v| Ok(g.sum(variance_from_raw(g, v[0], NOISE_FLOOR)))).unwrap();
        assert!(r.passes(1e-6), "{r:?}");
    }

    #[test]
    fn keep_all_is_identity() {
        let vd = VarianceDropout::with_default_floor(1.0).unwrap();
        let g = Graph::new();
        let input = Tensor::matrix(2, 2, vec![0.3, 1.0, 2.0, 0.07]);
        let v = g.constant(input.clone());
        let mut rng = seeded_rng(0, 0);
        let out = apply_variance_dropout(&g, v, &vd, &mut rng, true).unwrap();
        let got = g.value(out).clone();
        for (a, b) in got.data().iter().zip(input.data()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn dropped_coordinate_is_exactly_floor() {
        let vd = VarianceDropout::with_default_floor(0.5).unwrap();
        let g = Graph::new();
        let v = g.constant(Tensor::row(vec![0.9, 0.4]));
        let out = vd.apply_with_mask(&g, v, &Tensor::row(vec![0.0, 2.0])).unwrap();
        let got = g.value(out).clone();
        assert_eq!(got.data()[0], NOISE_FLOOR);
        assert!((got.data()[1] - (2.0 * (0.4 - NOISE_FLOOR) + NOISE_FLOOR)).abs() < 1e-15);
    }

    #[test]
    fn evaluation_is_identity() {
        let vd = VarianceDropout::with_default_floor(0.3).unwrap();
        let g = Graph::new();
        let v = g.constant(Tensor::row(vec![0.9, 0.4]));
        let mut rng = seeded_rng(0, 0);
        assert_eq!(apply_variance_dropout(&g, v, &vd, &mut rng, false).unwrap(), v);
    }

    #[test]
    fn training_below_floor_is_rejected() {
        let vd = VarianceDropout::with_default_floor(0.5).unwrap();
        let g = Graph::new();
        let v = g.constant(Tensor::row(vec![NOISE_FLOOR]));
        let mut rng = seeded_rng(0, 0);
        assert!(matches!(
            apply_variance_dropout(&g, v, &vd, &mut rng, true),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn never_below_floor() {
        let vd = VarianceDropout::with_default_floor(0.2).unwrap();
        let mut rng = seeded_rng(3, 1);
        for _ in 0..50 {
            let g = Graph::new();
            let raw = g.constant(crate::numcore::rng::uniform_tensor(&mut rng, 8, 4, -35.0, 3.0));
            let v = variance_from_raw(&g, raw, NOISE_FLOOR);
            let out = apply_variance_dropout(&g, v, &vd, &mut rng, true).unwrap();
            assert!(g.value(out).data().iter().all(|&x| x >= NOISE_FLOOR));
        }
    }
}
