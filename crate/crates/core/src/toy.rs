//! Seeded synthetic datasets with a pairwise reference energy.
//!
//! Used by tests and examples in place of the real QM9 / materials data. The
//! reference energy is a sum of element terms plus Morse pair terms whose depth
//! and equilibrium distance depend on both species.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::structures::vec3::{self, Vec3};
use crate::structures::{insert_target, AtomicStructure, Cell, DatasetRecord};

/// Elements drawn for toy molecules: H, C, N, O.
pub const MOLECULE_SPECIES: [u32; 4] = [1, 6, 7, 8];
/// Elements drawn for toy crystals: Li, O, Na, Cl, Mg.
pub const CRYSTAL_SPECIES: [u32; 5] = [3, 8, 11, 17, 12];

#[derive(Debug, Clone, PartialEq)]
pub struct ToyConfig {
    pub n_structures: usize,
    pub min_atoms: usize,
    pub max_atoms: usize,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            n_structures: 100,
            min_atoms: 3,
            max_atoms: 6,
            seed: 0,
        }
    }
}

fn element_energy(z: u32) -> f64 {
    -0.5 - 0.15 * z as f64
}

/// Morse well `D (1 - exp(-a (d - r0)))^2 - D` for a species pair.
pub fn pair_energy(za: u32, zb: u32, d: f64) -> f64 {
    let (lo, hi) = (za.min(zb) as f64, za.max(zb) as f64);
    let depth = 0.4 + 0.05 * (lo + 0.5 * hi).sqrt();
    let r0 = 0.9 + 0.04 * (lo + hi);
    let a = 1.6;
    let x = 1.0 - (-a * (d - r0)).exp();
    depth * x * x - depth
}

/// Reference energy of a finite structure.
pub fn reference_energy(s: &AtomicStructure) -> f64 {
    let z = s.species();
    let p = s.positions();
    let mut e: f64 = z.iter().map(|&z| element_energy(z)).sum();
    for i in 0..z.len() {
        for j in i + 1..z.len() {
            e += pair_energy(z[i], z[j], vec3::norm(vec3::sub(p[i], p[j])));
        }
    }
    e
}

fn grow_molecule(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec3> {
    let mut positions: Vec<Vec3> = vec![[0.0; 3]];
    while positions.len() < n {
        let anchor = positions[rng.gen_range(0..positions.len())];
        let dir: Vec3 = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        let len = vec3::norm(dir);
        if !(0.1..=1.0).contains(&len) {
            continue;
        }
        let bond = rng.gen_range(0.95..1.6);
        let candidate = vec3::add(anchor, vec3::scale(dir, bond / len));
        if positions
            .iter()
            .all(|&q| vec3::norm(vec3::sub(candidate, q)) > 0.9)
        {
            positions.push(candidate);
        }
    }
    positions
}

/// Connected molecules of H/C/N/O with target `U0` in eV.
pub fn toy_molecules(config: &ToyConfig) -> Vec<DatasetRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    (0..config.n_structures)
        .map(|i| {
            let n = rng.gen_range(config.min_atoms..=config.max_atoms);
            let species: Vec<u32> = (0..n)
                .map(|_| MOLECULE_SPECIES[rng.gen_range(0..MOLECULE_SPECIES.len())])
                .collect();
            let positions = grow_molecule(&mut rng, n);
            let structure = AtomicStructure::molecule(species, positions).expect("valid toy molecule");
            let mut targets = BTreeMap::new();
            insert_target(&mut targets, "U0", reference_energy(&structure)).expect("registry target");
            DatasetRecord {
                id: format!("toy{i}"),
                structure,
                targets,
            }
        })
        .collect()
}

/// Small jittered rock-salt-like cells with target `formation_energy_per_atom`
/// (eV/atom) given by a species-weighted term plus a strain term.
pub fn toy_crystals(config: &ToyConfig) -> Vec<DatasetRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    (0..config.n_structures)
        .map(|i| {
            let a = rng.gen_range(3.6..4.8);
            let skew = rng.gen_range(-0.3..0.3);
            let cell = Cell::new([[a, 0.0, 0.0], [skew, a, 0.0], [0.0, skew, a]]).expect("valid toy cell");
            let sites: [Vec3; 2] = [[0.0; 3], [0.5, 0.5, 0.5]];
            let species: Vec<u32> = (0..2)
                .map(|_| CRYSTAL_SPECIES[rng.gen_range(0..CRYSTAL_SPECIES.len())])
                .collect();
            let positions: Vec<Vec3> = sites
                .iter()
                .map(|&f| {
                    let jitter = [
                        rng.gen_range(-0.04..0.04),
                        rng.gen_range(-0.04..0.04),
                        rng.gen_range(-0.04..0.04),
                    ];
                    cell.to_cartesian(vec3::add(f, jitter))
                })
                .collect();
            let d = vec3::norm(vec3::sub(positions[1], positions[0]));
            let ef = -0.2 * (species[0] as f64 - species[1] as f64).abs().sqrt()
                + 0.3 * (a - 4.2).powi(2)
                + 0.1 * (d - a * 0.866).abs();
            let structure = AtomicStructure::new(species, positions, Some(cell)).expect("valid toy crystal");
            let mut targets = BTreeMap::new();
            insert_target(&mut targets, "formation_energy_per_atom", ef).expect("registry target");
            DatasetRecord {
                id: format!("xtal{i}"),
                structure,
                targets,
            }
        })
        .collect()
}
