//! Voronoi face neighbours of the cubic lattices and the cell volumes.

use edgenet::graphs::voronoi::voronoi_cells;
use edgenet::structures::{AtomicStructure, Cell};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let h = 3.61 / 2.0;
    let lattices = [
        (
            "simple cubic",
            AtomicStructure::new(vec![84], vec![[0.0; 3]], Some(Cell::cubic(3.35)?))?,
        ),
        (
            "bcc",
            AtomicStructure::new(vec![26, 26], vec![[0.0; 3], [1.435; 3]], Some(Cell::cubic(2.87)?))?,
        ),
        (
            "fcc",
            AtomicStructure::new(
                vec![29],
                vec![[0.0; 3]],
                Some(Cell::new([[0.0, h, h], [h, 0.0, h], [h, h, 0.0]])?),
            )?,
        ),
    ];
    for (name, s) in &lattices {
        let cells = voronoi_cells(s)?;
        let volume: f64 = cells.iter().map(|c| c.volume).sum();
        println!(
            "{name:<13} faces {:>2}   cell volumes {volume:.4} Å^3 (lattice {:.4})",
            cells[0].neighbors.len(),
            s.cell().unwrap().volume()
        );
    }
    Ok(())
}
