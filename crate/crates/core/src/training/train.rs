use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Reduce, Tensor};
use crate::graphs::batch_graphs;
use crate::model::{loss_and_gradients, predict, ModelParams};

use super::{
    fit_normalization, mae, Adam, AdamConfig, NormMode, NormalizationStats, Sample, TrainConfig,
    TrainingError,
};

/// Minibatches are split into this many shards for gradient evaluation.
/// Fixed so that the reduction order does not depend on the thread count.
const SHARDS: usize = 4;
/// Graphs per forward pass when predicting.
const PREDICT_CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub step: u64,
    pub lr: f64,
    /// Mean minibatch loss since the previous row.
    pub train_loss: f64,
    pub val_mae: f64,
}

impl LogRow {
    pub const CSV_HEADER: &'static str = "step,lr,train_loss,val_mae";

    pub fn write_csv<W: Write>(rows: &[LogRow], mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for r in rows {
            writeln!(w, "{},{},{},{}", r.step, r.lr, r.train_loss, r.val_mae)?;
        }
        w.flush()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StopReason {
    MaxSteps,
    Patience,
    Callback,
    /// Loss or gradient became non-finite; the best parameters so far are kept.
    NonFinite { step: u64, detail: String },
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters with the lowest validation MAE seen.
    pub params: ModelParams,
    pub best_step: u64,
    pub best_val_mae: f64,
    pub normalization: NormalizationStats,
    pub log: Vec<LogRow>,
    pub steps: u64,
    pub stop: StopReason,
}

/// Tracks the best validation score and the step it was reached.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopper {
    patience: u64,
    best: Option<(u64, f64)>,
}

impl EarlyStopper {
    pub fn new(patience: u64) -> Self {
        Self {
            patience,
            best: None,
        }
    }

    /// Record a score; returns true on strict improvement.
    pub fn observe(&mut self, step: u64, score: f64) -> bool {
        let better = match self.best {
            None => score.is_finite(),
            Some((_, b)) => score < b,
        };
        if better {
            self.best = Some((step, score));
        }
        better
    }

    pub fn best(&self) -> Option<(u64, f64)> {
        self.best
    }

    pub fn should_stop(&self, step: u64) -> bool {
        self.best
            .is_some_and(|(b, _)| step.saturating_sub(b) >= self.patience)
    }
}

fn norm_mode(params: &ModelParams) -> NormMode {
    match params.config().readout_agg {
        Reduce::Sum => NormMode::PerAtom,
        Reduce::Mean => NormMode::Plain,
    }
}

/// Denormalized predictions for `samples`, in order.
pub fn predict_samples(
    params: &ModelParams,
    samples: &[Sample],
    stats: &NormalizationStats,
) -> Result<Vec<f64>, TrainingError> {
    let chunks: Vec<Vec<f64>> = samples
        .par_chunks(PREDICT_CHUNK)
        .map(|chunk| {
            let g = batch_graphs(chunk.iter().map(|s| &s.graph))?;
            let y = predict(params, &g)?;
            Ok(y.iter()
                .zip(chunk)
                .map(|(&y, s)| stats.denormalize(y, s.n_atoms()))
                .collect())
        })
        .collect::<Result<_, TrainingError>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

/// Mean squared error on normalized targets over `batch`, with gradients.
/// Shards are evaluated in parallel and reduced in shard order.
pub fn batch_loss_and_gradients(
    params: &ModelParams,
    batch: &[&Sample],
    stats: &NormalizationStats,
) -> Result<(f64, BTreeMap<String, Tensor>), TrainingError> {
    if batch.is_empty() {
        return Err(TrainingError::EmptyDataset);
    }
    let shard_len = batch.len().div_ceil(SHARDS);
    let parts: Vec<(f64, usize, BTreeMap<String, Tensor>)> = batch
        .par_chunks(shard_len)
        .map(|shard| {
            let g = batch_graphs(shard.iter().map(|s| &s.graph))?;
            let t: Vec<f64> = shard
                .iter()
                .map(|s| stats.normalize(s.target, s.n_atoms()))
                .collect();
            let (loss, grads) = loss_and_gradients(params, &g, &t)?;
            Ok((loss, shard.len(), grads))
        })
        .collect::<Result<_, TrainingError>>()?;
    let n = batch.len() as f64;
    let mut loss = 0.0;
    let mut total: Option<BTreeMap<String, Tensor>> = None;
    for (l, k, grads) in parts {
        let w = k as f64 / n;
        loss += w * l;
        match total.as_mut() {
            None => {
                let mut grads = grads;
                for g in grads.values_mut() {
                    g.data_mut().iter_mut().for_each(|x| *x *= w);
                }
                total = Some(grads);
            }
            Some(acc) => {
                for (name, g) in grads {
                    let a = acc.get_mut(&name).expect("same parameter set");
                    for (x, y) in a.data_mut().iter_mut().zip(g.data()) {
                        *x += w * y;
                    }
                }
            }
        }
    }
    Ok((loss, total.expect("at least one shard")))
}

/// Train from `initial` with minibatch Adam. Normalization is fitted on
/// `train_set` only. `on_eval` sees each log row and may stop the run.
pub fn train(
    initial: ModelParams,
    train_set: &[Sample],
    val_set: &[Sample],
    config: &TrainConfig,
    on_eval: &mut dyn FnMut(&LogRow) -> Control,
) -> Result<TrainOutcome, TrainingError> {
    config.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(TrainingError::EmptyDataset);
    }
    let pairs: Vec<(f64, usize)> = train_set.iter().map(|s| (s.target, s.n_atoms())).collect();
    let stats = fit_normalization(&pairs, norm_mode(&initial))?;
    let val_targets: Vec<f64> = val_set.iter().map(|s| s.target).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut cursor = order.len();

    let mut params = initial;
    let mut best_params = params.clone();
    let mut adam = Adam::new(AdamConfig::default());
    let mut stopper = EarlyStopper::new(config.patience_steps);
    let mut log = Vec::new();
    let mut loss_sum = 0.0;
    let mut loss_count = 0u64;
    let mut step = 0u64;

    let stop = loop {
        if cursor >= order.len() {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let end = (cursor + config.batch_size).min(order.len());
        let batch: Vec<&Sample> = order[cursor..end].iter().map(|&i| &train_set[i]).collect();
        cursor = end;

        let lr = config.lr_at(step);
        let (loss, grads) = batch_loss_and_gradients(&params, &batch, &stats)?;
        if !loss.is_finite() {
            break StopReason::NonFinite {
                step,
                detail: format!("loss is {loss}"),
            };
        }
        match adam.step(&mut params, &grads, lr) {
            Ok(()) => {}
            Err(TrainingError::NonFiniteGradient(name)) => {
                break StopReason::NonFinite {
                    step,
                    detail: format!("non-finite gradient for {name}"),
                };
            }
            Err(e) => return Err(e),
        }
        step += 1;
        loss_sum += loss;
        loss_count += 1;

        if step.is_multiple_of(config.eval_every) || step == config.max_steps {
            let pred = predict_samples(&params, val_set, &stats)?;
            let val_mae = mae(&pred, &val_targets);
            let row = LogRow {
                step,
                lr,
                train_loss: loss_sum / loss_count as f64,
                val_mae,
            };
            loss_sum = 0.0;
            loss_count = 0;
            log.push(row);
            if stopper.observe(step, val_mae) {
                best_params = params.clone();
            }
            if on_eval(&row) == Control::Stop {
                break StopReason::Callback;
            }
            if stopper.should_stop(step) {
                break StopReason::Patience;
            }
        }
        if step >= config.max_steps {
            break StopReason::MaxSteps;
        }
    };

    let (best_step, best_val_mae) = stopper.best().unwrap_or((0, f64::INFINITY));
    Ok(TrainOutcome {
        params: best_params,
        best_step,
        best_val_mae,
        normalization: stats,
        log,
        steps: step,
        stop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stopper_counts_from_best() {
        let mut s = EarlyStopper::new(100);
        assert!(!s.should_stop(1000));
        assert!(s.observe(50, 3.0));
        assert!(!s.observe(100, 3.0));
        assert!(!s.should_stop(149));
        assert!(s.should_stop(150));
        assert!(s.observe(150, 2.0));
        assert!(!s.should_stop(200));
        assert_eq!(s.best(), Some((150, 2.0)));
    }

    #[test]
    fn log_csv_format() {
        let rows = [LogRow {
            step: 10,
            lr: 0.5,
            train_loss: 1.25,
            val_mae: 0.125,
        }];
        let mut buf = Vec::new();
        LogRow::write_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "step,lr,train_loss,val_mae\n10,0.5,1.25,0.125\n");
    }
}
