use super::{sample_variance, DiagGaussian, PosteriorBatch};
use crate::error::{Error, Result};

/// `KL(q ‖ N(0, I)) = ½ Σ_d (μ_d² + δ_d² − log δ_d² − 1)`.
pub fn kl_to_std(q: &DiagGaussian) -> f64 {
    kl_to_std_parts(q.mean(), q.variance())
}

pub(crate) fn kl_to_std_parts(mean: &[f64], var: &[f64]) -> f64 {
    0.5 * mean
        .iter()
        .zip(var)
        .map(|(&m, &v)| m * m + v - v.ln() - 1.0)
        .sum::<f64>()
}

fn sym_kl_parts(m1: &[f64], v1: &[f64], m2: &[f64], v2: &[f64]) -> f64 {
    let mut four = 0.0;
    for d in 0..m1.len() {
        let diff = m1[d] - m2[d];
        four += diff * diff * (1.0 / v1[d] + 1.0 / v2[d]) + v1[d] / v2[d] + v2[d] / v1[d] - 2.0;
    }
    four / 4.0
}

/// Symmetric KL, the mean of the two directed divergences.
pub fn sym_kl(q1: &DiagGaussian, q2: &DiagGaussian) -> Result<f64> {
    if q1.dim() != q2.dim() {
        return Err(Error::shape("sym_kl", format!("n = {} vs n = {}", q1.dim(), q2.dim())));
    }
    Ok(sym_kl_parts(q1.mean(), q1.variance(), q2.mean(), q2.variance()))
}

/// Mutual posterior diversity: the mean symmetric KL over all ordered pairs
/// `(i, j)`, `i ≠ j`.
pub fn mpd(batch: &PosteriorBatch) -> Result<f64> {
    batch.require_pairs()?;
    let b = batch.len();
    let mut total = 0.0;
    for i in 0..b {
        for j in (i + 1)..b {
            total += sym_kl_parts(batch.mean_row(i), batch.var_row(i), batch.mean_row(j), batch.var_row(j));
        }
    }
    // each unordered pair stands for two ordered pairs with the same value
    Ok(2.0 * total / (b * (b - 1)) as f64)
}

/// MPD from per-dimension population moments:
///
/// `2·MPD = Σ_d E[(μ₁−μ₂)²/δ₁²] + Σ_d (E[δ²]·E[1/δ²] − 1)`
///
/// with every expectation taken as a U-statistic over distinct pairs, so the
/// result equals [`mpd`] exactly. Runs in `O(B·n)`.
pub fn mpd_moment_decomposition(batch: &PosteriorBatch) -> Result<f64> {
    batch.require_pairs()?;
    let inv: Vec<Vec<f64>> = (0..batch.dim())
        .map(|d| batch.var_column(d).iter().map(|v| 1.0 / v).collect())
        .collect();
    Ok(moment_mpd(batch, |d, i| batch.var_row(i)[d], |d, i| inv[d][i]))
}

/// Shared decomposition: `var(d, i)` is `E[δ²_{i,d}]` and `inv(d, i)` is
/// `E[1/δ²_{i,d}]` under whatever randomness acts on the variances.
pub(crate) fn moment_mpd(
    batch: &PosteriorBatch,
    var: impl Fn(usize, usize) -> f64,
    inv: impl Fn(usize, usize) -> f64,
) -> f64 {
    let b = batch.len();
    let pairs = (b * (b - 1)) as f64;
    let mut twice = 0.0;
    for d in 0..batch.dim() {
        let mu = batch.mean_column(d);
        let s1: f64 = mu.iter().sum();
        let s2: f64 = mu.iter().map(|m| m * m).sum();
        // Σ_j (μ_i − μ_j)² = B μ_i² − 2 μ_i S₁ + S₂
        let mut spread = 0.0;
        let (mut sv, mut sinv, mut diag) = (0.0, 0.0, 0.0);
        for (i, &m) in mu.iter().enumerate() {
            let (vi, ii) = (var(d, i), inv(d, i));
            spread += ii * (b as f64 * m * m - 2.0 * m * s1 + s2);
            sv += vi;
            sinv += ii;
            diag += vi * ii;
        }
        twice += spread / pairs + (sv * sinv - diag) / pairs - 1.0;
    }
    0.5 * twice
}

/// `(1/C)·Σ_d Var[μ_d]`, a lower bound on [`mpd`] whenever every variance
/// is at most `C`.
pub fn mpd_population_lower_bound(batch: &PosteriorBatch, c: f64) -> Result<f64> {
    batch.require_pairs()?;
    if !(c > 0.0) {
        return Err(Error::Precondition(format!("bound constant C = {c} must be positive")));
    }
    if let Some(v) = batch.variances().iter().find(|&&v| v > c) {
        return Err(Error::Precondition(format!("variance {v} exceeds C = {c}")));
    }
    let total: f64 = (0..batch.dim()).map(|d| sample_variance(&batch.mean_column(d))).sum();
    Ok(total / c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::seeded_rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_batch(seed: u64, b: usize, n: usize) -> PosteriorBatch {
        let mut rng = seeded_rng(seed, 0);
        let means = (0..b * n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let vars = (0..b * n).map(|_| rng.random_range(0.1..1.5)).collect();
        PosteriorBatch::new(n, means, vars).unwrap()
    }

    #[test]
    fn kl_prior_is_zero() {
        assert_eq!(kl_to_std(&DiagGaussian::standard(4)), 0.0);
    }

    #[test]
    fn kl_unit_shift() {
        let q = DiagGaussian::new(vec![1.0], vec![1.0]).unwrap();
        assert_eq!(kl_to_std(&q), 0.5);
    }

    #[test]
    fn sym_kl_hand_value() {
        let q1 = DiagGaussian::new(vec![0.0], vec![1.0]).unwrap();
        let q2 = DiagGaussian::new(vec![1.0], vec![1.0]).unwrap();
        assert_eq!(sym_kl(&q1, &q2).unwrap(), 0.5);
        assert_eq!(sym_kl(&q1, &q1).unwrap(), 0.0);
    }

    #[test]
    fn sym_kl_dimension_mismatch() {
        assert!(sym_kl(&DiagGaussian::standard(1), &DiagGaussian::standard(2)).is_err());
    }

    #[test]
    fn mpd_identical_rows_is_zero() {
        let b = PosteriorBatch::new(2, [0.3, -1.0].repeat(5), [0.4, 2.0].repeat(5)).unwrap();
        assert!(mpd(&b).unwrap().abs() < 1e-15);
    }

    #[test]
    fn mpd_two_rows_is_their_sym_kl() {
        let b = random_batch(3, 2, 3);
        let s = sym_kl(&b.gaussian(0), &b.gaussian(1)).unwrap();
        assert!((mpd(&b).unwrap() - s).abs() < 1e-14);
    }

    #[test]
    fn mpd_needs_two_rows() {
        let b = random_batch(1, 1, 2);
        assert!(matches!(mpd(&b), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn decomposition_matches_pairwise() {
        for seed in 0..10 {
            let b = random_batch(seed, 64, 2);
            let (direct, moments) = (mpd(&b).unwrap(), mpd_moment_decomposition(&b).unwrap());
            assert!((direct - moments).abs() < 1e-9, "{direct} vs {moments}");
        }
    }

    #[test]
    fn lower_bound_cases() {
        let flat = PosteriorBatch::new(1, vec![0.5; 6], vec![0.2, 0.3, 0.5, 0.5, 0.1, 0.4]).unwrap();
        assert_eq!(mpd_population_lower_bound(&flat, 0.5).unwrap(), 0.0);
        let b = random_batch(9, 32, 3);
        let c = b.variances().iter().cloned().fold(0.0, f64::max);
        assert!(mpd_population_lower_bound(&b, c).unwrap() <= mpd(&b).unwrap());
        assert!(matches!(
            mpd_population_lower_bound(&b, c * 0.5),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn per_pair_bound_tight_at_equal_variances() {
        // with δ₁² = δ₂² = C the first step of the per-pair chain is an equality
        let c = 0.7;
        let q1 = DiagGaussian::new(vec![0.4, -1.0], vec![c, c]).unwrap();
        let q2 = DiagGaussian::new(vec![-0.2, 0.5], vec![c, c]).unwrap();
        let four = 4.0 * sym_kl(&q1, &q2).unwrap();
        let sq: f64 = q1.mean().iter().zip(q2.mean()).map(|(a, b)| (a - b) * (a - b)).sum();
        assert!((four - sq * 2.0 / c).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn sym_kl_nonnegative_symmetric(
            m1 in prop::collection::vec(-3.0f64..3.0, 3),
            m2 in prop::collection::vec(-3.0f64..3.0, 3),
            v1 in prop::collection::vec(0.05f64..4.0, 3),
            v2 in prop::collection::vec(0.05f64..4.0, 3),
        ) {
            let q1 = DiagGaussian::new(m1.clone(), v1.clone()).unwrap();
            let q2 = DiagGaussian::new(m2.clone(), v2.clone()).unwrap();
            let a = sym_kl(&q1, &q2).unwrap();
            let b = sym_kl(&q2, &q1).unwrap();
            prop_assert!(a >= 0.0);
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
            if m1 != m2 || v1 != v2 {
                prop_assert!(a > 0.0);
            }
        }
    }
}
