use serde::{Deserialize, Serialize};

use super::divergence::kl_to_std_parts;
use super::{mpd, PosteriorBatch};

/// Which of the two collapse conditions a population satisfies.
///
/// Posteriors can all differ from the prior (positive KL) while still being
/// identical to each other; only a positive MPD rules out the second case.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseDiagnosis {
    pub min_kl: f64,
    pub mpd: f64,
    /// Some posterior is (within `tol`) the prior.
    pub posterior_equals_prior: bool,
    /// All posteriors are (within `tol`) the same distribution.
    pub posteriors_mutually_collapsed: bool,
}

pub fn collapse_diagnosis(batch: &PosteriorBatch, tol: f64) -> CollapseDiagnosis {
    let min_kl = (0..batch.len())
        .map(|i| kl_to_std_parts(batch.mean_row(i), batch.var_row(i)))
        .fold(f64::INFINITY, f64::min);
    // a single datapoint has no pairs, so nothing distinguishes it from the others
    let mpd = mpd(batch).unwrap_or(0.0);
    CollapseDiagnosis {
        min_kl,
        mpd,
        posterior_equals_prior: min_kl <= tol,
        posteriors_mutually_collapsed: mpd <= tol,
    }
}
