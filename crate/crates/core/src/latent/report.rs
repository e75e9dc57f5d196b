use serde::{Deserialize, Serialize};

use super::Prop1Report;

/// Latent-space metric bundle for one evaluation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Importance-weighted NLL, when a model was available to compute it.
    pub nll: Option<f64>,
    pub kl: f64,
    pub mi: f64,
    pub au_count: usize,
    /// Per-dimension activity `A_d`.
    pub activity: Vec<f64>,
    pub mpd: f64,
    pub ce: f64,
    pub prop1: Option<Prop1Report>,
}

impl MetricReport {
    /// Checks the active-unit bookkeeping against the activity vector.
    pub fn is_consistent(&self) -> bool {
        let counted = self.activity.iter().filter(|&&a| super::is_active(a)).count();
        counted == self.au_count && self.au_count <= self.activity.len()
    }
}
