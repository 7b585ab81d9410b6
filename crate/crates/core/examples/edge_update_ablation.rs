//! Same data, seed and budget with and without edge updates.
//!
//! `cargo run --release --example edge_update_ablation`

use edgenet::graphs::{CutoffPolicy, RbfConfig};
use edgenet::model::{ModelConfig, ModelParams};
use edgenet::toy::{toy_molecules, ToyConfig};
use edgenet::training::{prepare_samples, train, Control, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let policy = CutoffPolicy::Distance { r: 5.0 };
    let rbf = RbfConfig::default();
    let train_set = prepare_samples(&toy_molecules(&ToyConfig { n_structures: 300, seed: 1, ..ToyConfig::default() }), "U0", &policy, &rbf)?;
    let val_set = prepare_samples(&toy_molecules(&ToyConfig { n_structures: 100, seed: 2, ..ToyConfig::default() }), "U0", &policy, &rbf)?;
    let tc = TrainConfig {
        lr0: 1e-3,
        max_steps: 2000,
        eval_every: 500,
        ..TrainConfig::default()
    };
    for edge_updates in [false, true] {
        let config = ModelConfig {
            hidden_dim: 16,
            steps: 3,
            edge_updates,
            ..ModelConfig::molecules()
        };
        let params = ModelParams::init(config, 7)?;
        let n_params: usize = params.iter().map(|(_, t)| t.len()).sum();
        let out = train(params, &train_set, &val_set, &tc, &mut |_| Control::Continue)?;
        println!(
            "edge updates {:<5}  parameters {n_params:>6}  val MAE {:.4} eV",
            edge_updates, out.best_val_mae
        );
    }
    Ok(())
}
