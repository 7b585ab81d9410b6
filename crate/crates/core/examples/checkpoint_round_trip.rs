//! Save parameters with metadata, read them back and predict.

use edgenet::graphs::{build_graph, CutoffPolicy, RbfConfig};
use edgenet::model::{predict, read_checkpoint, write_checkpoint, Checkpoint, ModelConfig, ModelParams};
use edgenet::structures::AtomicStructure;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = ModelParams::init(ModelConfig { hidden_dim: 16, ..ModelConfig::molecules() }, 9)?;
    let ckpt = Checkpoint {
        params,
        metadata: serde_json::json!({ "target": "U0", "policy": "distance:5" }),
    };
    let mut bytes = Vec::new();
    write_checkpoint(&mut bytes, &ckpt)?;
    let back = read_checkpoint(bytes.as_slice())?;
    println!("{} bytes, {} parameters, metadata {}", bytes.len(), back.params.count(), back.metadata);

    let co = AtomicStructure::molecule(vec![6, 8], vec![[0.0; 3], [1.128, 0.0, 0.0]])?;
    let g = build_graph(&co, &CutoffPolicy::Distance { r: 5.0 }, &RbfConfig::default())?;
    println!("prediction before {:?}, after {:?}", predict(&ckpt.params, &g)?, predict(&back.params, &g)?);
    Ok(())
}
