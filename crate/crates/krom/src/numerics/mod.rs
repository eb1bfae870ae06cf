//! Dense 64-bit tensors with a reverse-mode gradient tape and Adam.
//!
//! Everything above this module (networks, losses) is expressed as a
//! [`Graph`] of tensor operations. A graph is rebuilt per evaluation;
//! tensors and parameter sets are immutable values once constructed, so
//! they can be shared read-only across worker threads.

mod adam;
mod conv;
mod graph;
pub mod init;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use graph::{Graph, NodeId};
pub use tensor::{GradRecord, ParamSet, Tensor};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("shape mismatch in {op} at node {node}: {detail}")]
    ShapeMismatch {
        op: &'static str,
        node: usize,
        detail: String,
    },
    #[error("non-finite value produced by {op} at node {node}")]
    NonFinite { op: &'static str, node: usize },
    #[error("backward requires a scalar output, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("non-finite gradient for parameter `{0}`")]
    NonFiniteGrad(String),
    #[error("gradient/parameter mismatch for `{name}`: {detail}")]
    GradMismatch { name: String, detail: String },
    #[error("invalid tensor: {0}")]
    InvalidTensor(String),
}
