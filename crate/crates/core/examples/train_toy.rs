//! Train on synthetic molecules and report test error with a bootstrap interval.
//!
//! `cargo run --release --example train_toy`

use edgenet::graphs::{CutoffPolicy, RbfConfig};
use edgenet::model::{ModelConfig, ModelParams};
use edgenet::toy::{toy_molecules, ToyConfig};
use edgenet::training::{
    evaluate_predictions, predict_samples, prepare_samples, random_split, train, Control, Sample,
    SplitPreset, TrainConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let records = toy_molecules(&ToyConfig {
        n_structures: 500,
        seed: 11,
        ..ToyConfig::default()
    });
    let samples = prepare_samples(&records, "U0", &CutoffPolicy::Distance { r: 5.0 }, &RbfConfig::default())?;
    let ids: Vec<String> = samples.iter().map(|s| s.id.clone()).collect();
    let splits = random_split(&ids, SplitPreset::Fractions.sizes(ids.len()), 0)?;
    let pick = |names: &[String]| -> Vec<Sample> {
        names
            .iter()
            .map(|n| samples.iter().find(|s| &s.id == n).unwrap().clone())
            .collect()
    };
    let (tr, va, te) = (pick(&splits.train), pick(&splits.val), pick(&splits.test));

    let config = ModelConfig {
        hidden_dim: 32,
        steps: 3,
        ..ModelConfig::molecules()
    };
    let tc = TrainConfig {
        lr0: 1e-3,
        max_steps: 3000,
        eval_every: 250,
        patience_steps: 1000,
        ..TrainConfig::default()
    };
    let out = train(ModelParams::init(config, 0)?, &tr, &va, &tc, &mut |row| {
        println!("step {:>5}  lr {:.2e}  loss {:.4}  val MAE {:.4} eV", row.step, row.lr, row.train_loss, row.val_mae);
        Control::Continue
    })?;
    println!("best step {} ({:?})", out.best_step, out.stop);

    let pred = predict_samples(&out.params, &te, &out.normalization)?;
    let targets: Vec<f64> = te.iter().map(|s| s.target).collect();
    let m = evaluate_predictions(&pred, &targets, 10_000, 0)?;
    println!("test MAE {:.4} eV, bootstrap 95th percentile {:.4} eV over {} molecules", m.mae, m.bootstrap_95th, m.n);
    Ok(())
}
