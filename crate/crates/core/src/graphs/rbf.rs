//! Gaussian radial basis expansion of interatomic distances.

use serde::{Deserialize, Serialize};

/// Centers at `-mu_min + k * delta` for `k = 0..=k_max`, width `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RbfConfig {
    pub mu_min: f64,
    pub delta: f64,
    pub k_max: usize,
}

impl Default for RbfConfig {
    fn default() -> Self {
        Self {
            mu_min: 0.0,
            delta: 0.1,
            k_max: 150,
        }
    }
}

impl RbfConfig {
    pub fn dim(&self) -> usize {
        self.k_max + 1
    }

    pub fn is_valid(&self) -> bool {
        self.delta > 0.0 && self.delta.is_finite() && self.mu_min.is_finite()
    }

    /// Write the expansion of `d` into `out` (length `dim()`).
    pub fn expand_into(&self, d: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim());
        for (k, slot) in out.iter_mut().enumerate() {
            let center = -self.mu_min + k as f64 * self.delta;
            let diff = d - center;
            *slot = (-(diff * diff) / self.delta).exp();
        }
    }
}

pub fn rbf_expand(d: f64, config: &RbfConfig) -> Vec<f64> {
    let mut out = vec![0.0; config.dim()];
    config.expand_into(d, &mut out);
    out
}
