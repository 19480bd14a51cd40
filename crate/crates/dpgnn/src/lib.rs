//! Graph classification with distribution-preserving auxiliary tasks.
//!
//! The crate bundles everything needed to run the experiments end to end:
//!
//! * [`data`] — TU-format ingestion, distribution targets, disjoint-union
//!   mini-batches, stratified folds, and synthetic fixtures,
//! * [`tensor`] — a minimal reverse-mode autodiff core over dense 2-D
//!   tensors (f32 or f64),
//! * [`model`] — the message-passing classifier with sum readout and five
//!   prediction heads,
//! * [`loss`] — the task losses, batch reductions, and weighted objective,
//! * [`train`] — mini-batch training, 10-fold cross-validation, grid search,
//!   and the ablation sweep,
//! * [`wl`] — a Weisfeiler-Lehman refinement oracle for expressiveness
//!   checks,
//! * [`gradcheck`] — finite-difference gradient verification,
//! * [`checkpoint`] — parameter persistence,
//! * [`config`] — the CLI-facing run configuration.

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod gradcheck;
pub mod loss;
pub mod model;
pub mod scalar;
pub mod tensor;
pub mod train;
pub mod wl;

use thiserror::Error;

/// Crate-wide error wrapper, mostly for the CLI surface.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] data::DataError),
    #[error(transparent)]
    Tensor(#[from] tensor::TensorError),
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Train(#[from] train::TrainError),
    #[error(transparent)]
    Checkpoint(#[from] checkpoint::CheckpointError),
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    /// Short machine-readable kind tag for CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Data(_) => "data",
            Error::Tensor(_) => "tensor",
            Error::Model(_) => "model",
            Error::Train(_) => "train",
            Error::Checkpoint(_) => "checkpoint",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
        }
    }
}
