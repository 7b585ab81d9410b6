use serde::{Deserialize, Serialize};

use crate::autodiff::Reduce;
use crate::graphs::RbfConfig;
use crate::structures::elements::MAX_ATOMIC_NUMBER;

use super::ModelError;

/// Architecture switches. Embedding rows are indexed directly by atomic number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Width `C` of atom and edge hidden states.
    pub hidden_dim: usize,
    /// Interaction steps `T`.
    pub steps: usize,
    pub edge_updates: bool,
    pub message_agg: Reduce,
    pub readout_agg: Reduce,
    pub rbf: RbfConfig,
    pub n_species: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::molecules()
    }
}

impl ModelConfig {
    /// C = 64, T = 3, summed messages and readout.
    pub fn molecules() -> Self {
        Self {
            hidden_dim: 64,
            steps: 3,
            edge_updates: true,
            message_agg: Reduce::Sum,
            readout_agg: Reduce::Sum,
            rbf: RbfConfig::default(),
            n_species: MAX_ATOMIC_NUMBER as usize + 1,
        }
    }

    /// C = 256, T = 3, averaged messages and readout.
    pub fn materials() -> Self {
        Self {
            hidden_dim: 256,
            message_agg: Reduce::Mean,
            readout_agg: Reduce::Mean,
            ..Self::molecules()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.hidden_dim == 0 {
            return Err(ModelError::Config("hidden_dim must be at least 1".into()));
        }
        if self.steps == 0 {
            return Err(ModelError::Config("steps must be at least 1".into()));
        }
        if self.n_species == 0 {
            return Err(ModelError::Config("n_species must be at least 1".into()));
        }
        if !self.rbf.is_valid() {
            return Err(ModelError::Config("invalid RBF configuration".into()));
        }
        Ok(())
    }

    /// Width of the edge state consumed by the filter network.
    pub fn edge_dim(&self) -> usize {
        if self.edge_updates {
            self.hidden_dim
        } else {
            self.rbf.dim()
        }
    }
}
