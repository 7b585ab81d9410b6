//! Read an extended-XYZ molecule and a crystal JSON line into dataset records.

use edgenet::structures::{parse_crystal_json, parse_xyz};

const WATER: &str = "3
id=water U0=-2076.5 gap=6.9
O 0.000 0.000 0.119
H 0.000 0.763 -0.477
H 0.000 -0.763 -0.477
";

const ROCKSALT: &str = r#"{"id":"NaCl","lattice":[[0,2.82,2.82],[2.82,0,2.82],[2.82,2.82,0]],"species":["Na","Cl"],"frac_coords":[[0,0,0],[0.5,0.5,0.5]],"targets":{"formation_energy_per_atom":-2.1}}"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut records = parse_xyz(WATER)?;
    records.extend(parse_crystal_json(ROCKSALT)?);
    for r in &records {
        println!("{} ({} atoms, periodic: {})", r.id, r.n_atoms(), r.structure.is_periodic());
        println!("  species {:?}", r.structure.species());
        if let Some(cell) = r.structure.cell() {
            println!("  cell volume {:.3} Å^3", cell.volume());
        }
        for (name, t) in &r.targets {
            println!("  {name} = {} {}", t.value, t.unit);
        }
    }
    Ok(())
}
