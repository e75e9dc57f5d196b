//! Inverse autoregressive flow over the latent code.
//!
//! One block maps `z ↦ δ ⊙ z + (1 − δ) ⊙ m` with `(m, s)` produced by a
//! MADE conditioner and `δ = σ(s)`. Each block's Jacobian is triangular, so
//! `log |det| = Σ_d log δ_d`.

mod checks;
mod iaf;

pub use checks::{flow_entropy_mc, mpd_invariance_check, FlowEntropy, InvarianceReport, InvarianceStatus, MIN_FLOW_SAMPLES};
pub use iaf::{FlowOutput, FlowSample, IafBlock, IafChain, IafConfig};
