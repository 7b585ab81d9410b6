//! Message passing network with optional edge updates.
//!
//! With `edge_updates = false` the network is plain SchNet: edge states stay
//! equal to the RBF features at every step.

pub mod checkpoint;
mod config;
pub mod filters;
mod network;
mod params;

use thiserror::Error;

use crate::autodiff::AutodiffError;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CheckpointError};
pub use config::ModelConfig;
pub use network::{loss_and_gradients, predict, Forward, GraphIndex, Network, StateBundle};
pub use params::{param_specs, step_prefix, Init, ModelParams, ParamSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("atomic number {z} has no embedding row (n_species = {n_species})")]
    UnknownSpecies { z: u32, n_species: usize },
    #[error("atom {0} has no incoming edges; mean aggregation is undefined")]
    NoIncomingEdges(usize),
    #[error("missing parameter {0}")]
    MissingParam(String),
    #[error("unexpected parameter {0}")]
    UnexpectedParam(String),
    #[error("parameter {name}: expected shape {expected:?}, got {got:?}")]
    ParamShape {
        name: String,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("parameter {0} holds a non-finite value")]
    NonFiniteParam(String),
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("graph RBF settings differ from the model's")]
    RbfMismatch,
    #[error("expected {expected} targets, got {got}")]
    TargetCount { expected: usize, got: usize },
}
