//! Tabulate first-layer filters and how much they depend on the atom pair.

use edgenet::model::filters::{default_grid, export_filters};
use edgenet::model::{ModelConfig, ModelParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let species = [1, 6, 7, 8, 9];
    for edge_updates in [false, true] {
        let config = ModelConfig {
            hidden_dim: 8,
            steps: 2,
            edge_updates,
            ..ModelConfig::molecules()
        };
        let params = ModelParams::init(config, 5)?;
        let table = export_filters(&params, &species, &default_grid())?;
        println!(
            "edge updates {edge_updates}: {} points x {} filters, max |deviation| {:.3e}",
            table.points.len(),
            table.n_filters,
            table.max_abs_deviation()
        );
        if let Some(p) = table.point(1, 8, 20) {
            println!("  H<-O at {:.2} Å: {:?}", p.distance, &p.values[..4]);
        }
    }

    let params = ModelParams::init(ModelConfig { hidden_dim: 4, steps: 1, ..ModelConfig::molecules() }, 5)?;
    let table = export_filters(&params, &[1, 8], &[0.5, 1.0, 1.5])?;
    table.write_csv(std::io::stdout().lock())?;
    Ok(())
}
