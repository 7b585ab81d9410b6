//! Train one model per cutoff policy through the experiment runner.
//!
//! `cargo run --release --example cutoff_sweep`

use edgenet::cli::{sweep, write_sweep_csv, ExperimentConfig};
use edgenet::graphs::CutoffPolicy;
use edgenet::model::ModelConfig;
use edgenet::toy::{toy_molecules, ToyConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("edgenet-sweep-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let dataset = dir.join("toy.jsonl");
    let lines: Vec<String> = toy_molecules(&ToyConfig { n_structures: 200, seed: 4, ..ToyConfig::default() })
        .iter()
        .map(serde_json::to_string)
        .collect::<Result<_, _>>()?;
    std::fs::write(&dataset, lines.join("\n"))?;

    let mut cfg = ExperimentConfig {
        dataset,
        bootstrap_samples: 1000,
        model: ModelConfig { hidden_dim: 16, steps: 2, ..ModelConfig::molecules() },
        ..ExperimentConfig::default()
    };
    cfg.train.lr0 = 1e-3;
    cfg.train.max_steps = 1000;
    cfg.train.eval_every = 250;
    let policies = [
        CutoffPolicy::Distance { r: 2.0 },
        CutoffPolicy::Distance { r: 5.0 },
        CutoffPolicy::KNearest { k: 2 },
        CutoffPolicy::Voronoi,
    ];
    let rows = sweep(&cfg, &policies)?;
    write_sweep_csv(std::io::stdout().lock(), &rows)?;
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
