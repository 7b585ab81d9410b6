//! Incoming-edge statistics of a periodic crystal under each cutoff policy.

use edgenet::graphs::{build_graph, graph_statistics, CutoffPolicy, RbfConfig};
use edgenet::structures::{AtomicStructure, Cell};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a = 5.64;
    let cell = Cell::new([[0.0, a / 2.0, a / 2.0], [a / 2.0, 0.0, a / 2.0], [a / 2.0, a / 2.0, 0.0]])?;
    let nacl = AtomicStructure::new(vec![11, 17], vec![[0.0; 3], [a / 2.0, 0.0, 0.0]], Some(cell))?;

    let policies = [
        CutoffPolicy::Distance { r: 3.0 },
        CutoffPolicy::Distance { r: 4.0 },
        CutoffPolicy::Distance { r: 5.0 },
        CutoffPolicy::KNearest { k: 6 },
        CutoffPolicy::KNearest { k: 12 },
        CutoffPolicy::Voronoi,
    ];
    println!("{:<14} {:>6} {:>10}", "policy", "edges", "mean in");
    for policy in policies {
        let g = build_graph(&nacl, &policy, &RbfConfig::default())?;
        let stats = graph_statistics([&g])?;
        println!("{:<14} {:>6} {:>10.2}", policy.to_string(), g.n_edges(), stats.mean_incoming_edges);
    }

    let g = build_graph(&nacl, &CutoffPolicy::KNearest { k: 6 }, &RbfConfig::default())?;
    println!("\nsix nearest neighbours of Na:");
    for e in g.edges().iter().filter(|e| e.dst == 0) {
        println!("  atom {} image {:?} at {:.3} Å", e.src, e.offset, e.distance);
    }
    Ok(())
}
