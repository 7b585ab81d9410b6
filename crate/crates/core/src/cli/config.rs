use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::graphs::CutoffPolicy;
use crate::model::ModelConfig;
use crate::structures::properties;
use crate::training::{SplitPreset, TrainConfig};

use super::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    /// Extended XYZ frames.
    Xyz,
    /// One crystal JSON object per line.
    CrystalJson,
    /// One serialized record per line, as written by `ingest`.
    Records,
    /// Decide from the file name and first line.
    Auto,
}

/// Everything one experiment needs, loadable from a single TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    pub format: DataFormat,
    pub target: String,
    #[serde(with = "policy_string")]
    pub policy: CutoffPolicy,
    pub split: SplitPreset,
    pub bootstrap_samples: usize,
    pub output_dir: PathBuf,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::from("dataset.jsonl"),
            format: DataFormat::Auto,
            target: "U0".into(),
            policy: CutoffPolicy::default(),
            split: SplitPreset::Fractions,
            bootstrap_samples: 100_000,
            output_dir: PathBuf::from("run"),
            model: ModelConfig::molecules(),
            train: TrainConfig::default(),
        }
    }
}

mod policy_string {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::graphs::CutoffPolicy;

    pub fn serialize<S: Serializer>(p: &CutoffPolicy, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(p)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CutoffPolicy, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Command-line values that replace fields of the file config when present.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// Input dataset file.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<DataFormat>,
    /// Target property name (e.g. U0, formation_energy_per_atom).
    #[arg(long)]
    pub target: Option<String>,
    /// distance:R | knearest:K | voronoi. `sweep-cutoff` accepts it repeatedly.
    #[arg(long = "policy")]
    pub policies: Vec<CutoffPolicy>,
    /// Train plain SchNet without edge updates.
    #[arg(long)]
    pub no_edge_updates: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub split: Option<SplitArg>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub lr0: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_steps: Option<u64>,
    #[arg(long)]
    pub eval_every: Option<u64>,
    #[arg(long)]
    pub patience_steps: Option<u64>,
    #[arg(long)]
    pub bootstrap_samples: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SplitArg {
    Qm9,
    MaterialsProject,
    Oqmd,
    Fractions,
}

impl From<SplitArg> for SplitPreset {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Qm9 => SplitPreset::Qm9,
            SplitArg::MaterialsProject => SplitPreset::MaterialsProject,
            SplitArg::Oqmd => SplitPreset::Oqmd,
            SplitArg::Fractions => SplitPreset::Fractions,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    /// File config (or the defaults) with flag overrides applied, then validated.
    pub fn resolve(path: Option<&Path>, o: &Overrides) -> Result<Self, CliError> {
        let mut c = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if let Some(v) = &o.dataset {
            c.dataset = v.clone();
        }
        if let Some(v) = o.format {
            c.format = v;
        }
        if let Some(v) = &o.target {
            c.target = v.clone();
        }
        match o.policies.as_slice() {
            [] => {}
            [p] => c.policy = *p,
            _ => return Err(CliError::Usage("--policy given more than once".into())),
        }
        if o.no_edge_updates {
            c.model.edge_updates = false;
        }
        if let Some(v) = o.seed {
            c.train.seed = v;
        }
        if let Some(v) = &o.output_dir {
            c.output_dir = v.clone();
        }
        if let Some(v) = o.split {
            c.split = v.into();
        }
        if let Some(v) = o.hidden_dim {
            c.model.hidden_dim = v;
        }
        if let Some(v) = o.steps {
            c.model.steps = v;
        }
        if let Some(v) = o.lr0 {
            c.train.lr0 = v;
        }
        if let Some(v) = o.batch_size {
            c.train.batch_size = v;
        }
        if let Some(v) = o.max_steps {
            c.train.max_steps = v;
        }
        if let Some(v) = o.eval_every {
            c.train.eval_every = v;
        }
        if let Some(v) = o.patience_steps {
            c.train.patience_steps = v;
        }
        if let Some(v) = o.bootstrap_samples {
            c.bootstrap_samples = v;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if properties::lookup(&self.target).is_none() {
            return Err(CliError::Usage(format!("unknown target property {:?}", self.target)));
        }
        self.policy
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        self.model
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        self.train
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
