//! Optimisation loop: Adam with step decay, target normalization, early
//! stopping and MAE evaluation.

mod adam;
mod evaluate;
mod normalization;
mod split;
mod train;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graphs::{build_graph, CutoffPolicy, GraphError, MolecularGraph, RbfConfig};
use crate::model::ModelError;
use crate::structures::DatasetRecord;

pub use adam::{lr_at, Adam, AdamConfig};
pub use evaluate::{evaluate_predictions, mae, Metrics};
pub use normalization::{fit_normalization, NormMode, NormalizationStats, MIN_SIGMA};
pub use split::{random_split, read_ids, write_ids, SplitPreset, SplitSizes, Splits};
pub use train::{
    batch_loss_and_gradients, predict_samples, train, Control, EarlyStopper, LogRow, StopReason,
    TrainOutcome,
};

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("need at least 2 records to fit normalization, got {0}")]
    TooFewRecords(usize),
    #[error("degenerate targets")]
    DegenerateTargets,
    #[error("record {id}: missing target {target}")]
    MissingTarget { id: String, target: String },
    #[error("record {id}: {source}")]
    Record { id: String, source: GraphError },
    #[error("no gradient for parameter {0}")]
    MissingGradient(String),
    #[error("gradient shape differs for parameter {0}")]
    GradientShape(String),
    #[error("non-finite gradient for parameter {0}")]
    NonFiniteGradient(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr0: f64,
    pub decay_factor: f64,
    pub decay_every: u64,
    pub batch_size: usize,
    pub max_steps: u64,
    pub eval_every: u64,
    pub patience_steps: u64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr0: 5e-4,
            decay_factor: 0.96,
            decay_every: 100_000,
            batch_size: 32,
            max_steps: 10_000_000,
            eval_every: 50_000,
            patience_steps: 1_000_000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainingError> {
        let bad = |what: &str| Err(TrainingError::Config(format!("{what} must be positive")));
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return bad("lr0");
        }
        if !(self.decay_factor > 0.0 && self.decay_factor.is_finite()) {
            return bad("decay_factor");
        }
        if self.decay_every == 0 {
            return bad("decay_every");
        }
        if self.batch_size == 0 {
            return bad("batch_size");
        }
        if self.max_steps == 0 {
            return bad("max_steps");
        }
        if self.eval_every == 0 {
            return bad("eval_every");
        }
        if self.patience_steps == 0 {
            return bad("patience_steps");
        }
        if self.eval_every > self.patience_steps {
            return Err(TrainingError::Config(
                "eval_every must not exceed patience_steps".into(),
            ));
        }
        Ok(())
    }

    pub fn lr_at(&self, step: u64) -> f64 {
        lr_at(self.lr0, self.decay_factor, self.decay_every, step)
    }
}

/// A graph with its raw (unnormalized) regression target.
#[derive(Debug, Clone)]
pub struct Sample {
    pub id: String,
    pub graph: MolecularGraph,
    pub target: f64,
}

impl Sample {
    pub fn n_atoms(&self) -> usize {
        self.graph.n_nodes()
    }
}

/// Build graphs for `records` in parallel, keeping input order.
pub fn prepare_samples(
    records: &[DatasetRecord],
    target: &str,
    policy: &CutoffPolicy,
    rbf: &RbfConfig,
) -> Result<Vec<Sample>, TrainingError> {
    records
        .par_iter()
        .map(|r| {
            let value = r.target(target).ok_or_else(|| TrainingError::MissingTarget {
                id: r.id.clone(),
                target: target.to_string(),
            })?;
            let graph = build_graph(&r.structure, policy, rbf).map_err(|source| {
                TrainingError::Record {
                    id: r.id.clone(),
                    source,
                }
            })?;
            Ok(Sample {
                id: r.id.clone(),
                graph,
                target: value,
            })
        })
        .collect()
}
