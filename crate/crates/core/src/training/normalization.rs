use serde::{Deserialize, Serialize};

use super::TrainingError;

/// Below this the fitted spread is treated as zero.
pub const MIN_SIGMA: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    /// `(t - n mu) / sigma` with mu, sigma estimated from `t / n`.
    PerAtom,
    /// `(t - mu) / sigma`.
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mu_hat: f64,
    pub sigma_hat: f64,
    pub mode: NormMode,
}

/// Fit on `(target, n_atoms)` pairs. Mean and standard deviation divide by the
/// number of records.
pub fn fit_normalization(
    samples: &[(f64, usize)],
    mode: NormMode,
) -> Result<NormalizationStats, TrainingError> {
    if samples.len() < 2 {
        return Err(TrainingError::TooFewRecords(samples.len()));
    }
    let values: Vec<f64> = samples
        .iter()
        .map(|&(t, n)| match mode {
            NormMode::PerAtom => t / n as f64,
            NormMode::Plain => t,
        })
        .collect();
    let count = values.len() as f64;
    let mu_hat = values.iter().sum::<f64>() / count;
    let var = values.iter().map(|x| (x - mu_hat).powi(2)).sum::<f64>() / count;
    let sigma_hat = var.sqrt();
    if !(sigma_hat >= MIN_SIGMA) {
        return Err(TrainingError::DegenerateTargets);
    }
    Ok(NormalizationStats {
        mu_hat,
        sigma_hat,
        mode,
    })
}

impl NormalizationStats {
    fn offset(&self, n_atoms: usize) -> f64 {
        match self.mode {
            NormMode::PerAtom => n_atoms as f64 * self.mu_hat,
            NormMode::Plain => self.mu_hat,
        }
    }

    pub fn normalize(&self, target: f64, n_atoms: usize) -> f64 {
        (target - self.offset(n_atoms)) / self.sigma_hat
    }

    pub fn denormalize(&self, y: f64, n_atoms: usize) -> f64 {
        y * self.sigma_hat + self.offset(n_atoms)
    }
}
