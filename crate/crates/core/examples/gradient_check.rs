//! Compare backpropagated gradients with central differences on one molecule.

use edgenet::graphs::{build_graph, CutoffPolicy, RbfConfig};
use edgenet::model::{loss_and_gradients, ModelConfig, ModelParams};
use edgenet::structures::AtomicStructure;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let water = AtomicStructure::molecule(
        vec![8, 1, 1],
        vec![[0.0, 0.0, 0.119], [0.0, 0.763, -0.477], [0.0, -0.763, -0.477]],
    )?;
    let graph = build_graph(&water, &CutoffPolicy::Distance { r: 5.0 }, &RbfConfig::default())?;
    let config = ModelConfig {
        hidden_dim: 8,
        steps: 2,
        n_species: 10,
        ..ModelConfig::molecules()
    };
    let params = ModelParams::init(config, 1)?;
    let target = [0.3];
    let (loss, grads) = loss_and_gradients(&params, &graph, &target)?;
    println!("loss {loss:.6}");

    let h = 1e-6;
    let mut worst = 0.0f64;
    for (name, t) in params.iter() {
        let mut name_worst = 0.0f64;
        for i in 0..t.len() {
            let mut p = params.clone();
            let x = t.data()[i];
            p.get_mut(name).unwrap().data_mut()[i] = x + h;
            let up = loss_and_gradients(&p, &graph, &target)?.0;
            p.get_mut(name).unwrap().data_mut()[i] = x - h;
            let down = loss_and_gradients(&p, &graph, &target)?.0;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads[name].data()[i];
            name_worst = name_worst.max((analytic - numeric).abs() / 1f64.max(analytic.abs()));
        }
        println!("{name:<32} {:>5} entries  max rel err {name_worst:.2e}", t.len());
        worst = worst.max(name_worst);
    }
    println!("worst {worst:.2e}");
    Ok(())
}
