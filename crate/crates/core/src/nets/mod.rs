//! Neural building blocks on the autodiff tape.
//!
//! Layers own [`Parameter`]s. A layer is bound to a [`Graph`] once per
//! forward pass with `bind`, which returns lightweight handles that can be
//! reused across time steps without copying weights again.

mod layers;
mod lstm;
mod made;

pub use layers::{Activation, BoundLinear, Embedding, Linear, Mlp};
pub use lstm::{BoundLstm, LstmCell, LstmState};
pub use made::{made_masks, BoundMaskedLinear, MadeMasks, MaskedLinear};

use crate::numcore::Parameter;

/// Default half-width of the uniform initializer for model weights.
pub const INIT_SCALE: f64 = 0.08;

/// Visits every parameter of a module, in a fixed order.
pub trait Module {
    fn parameters(&self) -> Vec<&Parameter>;
    fn parameters_mut(&mut self) -> Vec<&mut Parameter>;
}
