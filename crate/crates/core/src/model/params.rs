use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Tensor;

use super::{ModelConfig, ModelError};

/// How a parameter tensor is initialised.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Uniform in `+-sqrt(6 / (fan_in + fan_out))`.
    Xavier,
    Zeros,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub init: Init,
}

pub fn step_prefix(t: usize) -> String {
    format!("interaction.{t}")
}

/// Every parameter of the architecture, in a fixed order.
pub fn param_specs(config: &ModelConfig) -> Vec<ParamSpec> {
    let c = config.hidden_dim;
    let rbf = config.rbf.dim();
    let mut specs = Vec::new();
    let mut add = |name: String, rows: usize, cols: usize, init: Init| {
        specs.push(ParamSpec {
            name,
            rows,
            cols,
            init,
        })
    };
    add("embedding".into(), config.n_species, c, Init::Xavier);
    for t in 0..config.steps {
        let p = step_prefix(t);
        if config.edge_updates {
            let edge_in = if t == 0 { rbf } else { c };
            add(format!("{p}.edge.w1"), 2 * c + edge_in, 2 * c, Init::Xavier);
            add(format!("{p}.edge.b1"), 1, 2 * c, Init::Zeros);
            add(format!("{p}.edge.w2"), 2 * c, c, Init::Xavier);
            add(format!("{p}.edge.b2"), 1, c, Init::Zeros);
        }
        add(format!("{p}.message.w1"), c, c, Init::Xavier);
        add(format!("{p}.filter.w2"), config.edge_dim(), c, Init::Xavier);
        add(format!("{p}.filter.b2"), 1, c, Init::Zeros);
        add(format!("{p}.filter.w3"), c, c, Init::Xavier);
        add(format!("{p}.filter.b3"), 1, c, Init::Zeros);
        add(format!("{p}.transition.w4"), c, c, Init::Xavier);
        add(format!("{p}.transition.b4"), 1, c, Init::Zeros);
        add(format!("{p}.transition.w5"), c, c, Init::Xavier);
        add(format!("{p}.transition.b5"), 1, c, Init::Zeros);
    }
    add("readout.w6".into(), c, c, Init::Xavier);
    add("readout.b6".into(), 1, c, Init::Zeros);
    add("readout.w7".into(), c, 1, Init::Xavier);
    add("readout.b7".into(), 1, 1, Init::Zeros);
    specs
}

/// Named weight tensors of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    config: ModelConfig,
    tensors: BTreeMap<String, Tensor>,
}

impl ModelParams {
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tensors = BTreeMap::new();
        for spec in param_specs(&config) {
            let limit = match spec.init {
                Init::Xavier => (6.0 / (spec.rows + spec.cols) as f64).sqrt(),
                Init::Zeros => 0.0,
            };
            tensors.insert(spec.name, Tensor::uniform(spec.rows, spec.cols, limit, &mut rng));
        }
        Ok(Self { config, tensors })
    }

    /// Wrap externally supplied tensors, checking names and shapes.
    pub fn from_tensors(
        config: ModelConfig,
        tensors: BTreeMap<String, Tensor>,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        let specs = param_specs(&config);
        for spec in &specs {
            let t = tensors
                .get(&spec.name)
                .ok_or_else(|| ModelError::MissingParam(spec.name.clone()))?;
            if t.shape() != (spec.rows, spec.cols) {
                return Err(ModelError::ParamShape {
                    name: spec.name.clone(),
                    expected: (spec.rows, spec.cols),
                    got: t.shape(),
                });
            }
            if !t.is_finite() {
                return Err(ModelError::NonFiniteParam(spec.name.clone()));
            }
        }
        if let Some(extra) = tensors.keys().find(|k| !specs.iter().any(|s| &s.name == *k)) {
            return Err(ModelError::UnexpectedParam(extra.clone()));
        }
        Ok(Self { config, tensors })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.tensors.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor)> {
        self.tensors.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.tensors.keys()
    }

    /// Total number of scalar weights.
    pub fn count(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    /// Set every tensor to zero.
    pub fn zero(&mut self) {
        for t in self.tensors.values_mut() {
            t.data_mut().fill(0.0);
        }
    }
}
