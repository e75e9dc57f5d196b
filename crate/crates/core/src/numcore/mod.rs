//! Dense tensors, a dynamic reverse-mode tape, seeded random streams and
//! finite-difference gradient checking.

mod graph;
pub mod gradcheck;
pub mod rng;
mod tensor;

pub use graph::{BinaryOp, Gradients, Graph, ParamId, Parameter, ReduceOp, UnaryOp, Var};
pub(crate) use graph::{log_sum_exp, sigmoid};
pub use rng::{seeded_rng, RngStream, StreamCursor};
pub use tensor::Tensor;
