use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TrainingError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub mae: f64,
    /// 95th percentile of the bootstrap-resampled MAE (nearest rank).
    pub bootstrap_95th: f64,
    pub bootstrap_samples: usize,
}

pub fn mae(predictions: &[f64], targets: &[f64]) -> f64 {
    let total: f64 = predictions.iter().zip(targets).map(|(p, t)| (p - t).abs()).sum();
    total / predictions.len() as f64
}

/// MAE plus a seeded bootstrap percentile over `resamples` draws with replacement.
pub fn evaluate_predictions(
    predictions: &[f64],
    targets: &[f64],
    resamples: usize,
    seed: u64,
) -> Result<Metrics, TrainingError> {
    if predictions.len() != targets.len() {
        return Err(TrainingError::Config(format!(
            "{} predictions for {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    if predictions.is_empty() {
        return Err(TrainingError::EmptyDataset);
    }
    let errors: Vec<f64> = predictions.iter().zip(targets).map(|(p, t)| (p - t).abs()).collect();
    let n = errors.len();
    let mae = errors.iter().sum::<f64>() / n as f64;
    let bootstrap_95th = if resamples == 0 {
        mae
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draws: Vec<f64> = (0..resamples)
            .map(|_| (0..n).map(|_| errors[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
            .collect();
        draws.sort_by(f64::total_cmp);
        let rank = (0.95 * resamples as f64).ceil() as usize;
        draws[rank.clamp(1, resamples) - 1]
    };
    Ok(Metrics {
        n,
        mae,
        bootstrap_95th,
        bootstrap_samples: resamples,
    })
}
