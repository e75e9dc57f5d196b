pub mod cli;
pub mod error;
pub mod eval;
pub mod flows;
pub mod latent;
pub mod models;
pub mod nets;
pub mod numcore;
pub mod regularizers;
pub mod synth;

pub use error::{Error, Result};
