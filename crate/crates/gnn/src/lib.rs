//! Graph neural network inference for Ising-model marginals.
//!
//! [`nn`] holds the dense, GRU, loss and optimizer building blocks with
//! hand-written backward passes, [`model`] the message-passing network and
//! its gradient, [`train`] the minibatch training loop and [`io`] the JSON
//! weight format.

pub mod io;
pub mod model;
pub mod nn;
pub mod train;

use thiserror::Error;

pub use io::{load_params, save_params};
pub use model::{cross_entropy_loss, gnn_forward, predict, GnnDims, GnnParams, LabeledSample};
pub use train::{train, TrainConfig};

#[derive(Debug, Error)]
pub enum GnnError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid network dimensions: {0}")]
    InvalidDims(String),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("training set is empty")]
    EmptyDataset,
    #[error("weight file format version {found} is not supported (expected {expected})")]
    FormatVersionMismatch { expected: u32, found: u64 },
    #[error("corrupt weight file: {0}")]
    CorruptFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
