//! Shared fixtures and brute-force oracles for the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use edgenet::structures::vec3::{self, Vec3};
use edgenet::structures::{AtomicStructure, Cell};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const SPECIES: [u32; 5] = [1, 6, 8, 11, 17];

/// Random triclinic cell with lattice angles in [60, 120] degrees and up to
/// `max_atoms` atoms at fractional coordinates in [0, 1). Also returns the
/// smallest perpendicular width.
pub fn random_periodic(rng: &mut ChaCha8Rng, max_atoms: usize) -> (AtomicStructure, f64) {
    loop {
        let la = rng.gen_range(2.5..4.5);
        let lb = rng.gen_range(2.5..4.5);
        let lc = rng.gen_range(2.5..4.5);
        let deg = std::f64::consts::PI / 180.0;
        let alpha: f64 = rng.gen_range(60.0..120.0) * deg;
        let beta: f64 = rng.gen_range(60.0..120.0) * deg;
        let gamma: f64 = rng.gen_range(60.0..120.0) * deg;
        let a = [la, 0.0, 0.0];
        let b = [lb * gamma.cos(), lb * gamma.sin(), 0.0];
        let cx = lc * beta.cos();
        let cy = lc * (alpha.cos() - beta.cos() * gamma.cos()) / gamma.sin();
        let cz2 = lc * lc - cx * cx - cy * cy;
        if cz2 < 0.5 {
            continue;
        }
        let cell = Cell::new([a, b, [cx, cy, cz2.sqrt()]]).unwrap();
        let n = rng.gen_range(1..=max_atoms.max(1));
        let species = (0..n).map(|_| SPECIES[rng.gen_range(0..SPECIES.len())]).collect();
        let positions = (0..n)
            .map(|_| cell.to_cartesian([rng.gen(), rng.gen(), rng.gen()]))
            .collect();
        let w = cell.perpendicular_widths();
        let w_min = w[0].min(w[1]).min(w[2]);
        return (AtomicStructure::new(species, positions, Some(cell)).unwrap(), w_min);
    }
}

/// Random molecule of `n` atoms with all pair distances at least 0.7 Å.
pub fn random_molecule(rng: &mut ChaCha8Rng, n: usize, box_size: f64) -> AtomicStructure {
    let mut positions: Vec<Vec3> = Vec::new();
    while positions.len() < n {
        let p = [
            rng.gen_range(0.0..box_size),
            rng.gen_range(0.0..box_size),
            rng.gen_range(0.0..box_size),
        ];
        if positions.iter().all(|q| vec3::norm(vec3::sub(p, *q)) > 0.7) {
            positions.push(p);
        }
    }
    let species = (0..n).map(|_| SPECIES[rng.gen_range(0..3)]).collect();
    AtomicStructure::molecule(species, positions).unwrap()
}

fn translation(cell: &Cell, o: [i32; 3]) -> Vec3 {
    let [a, b, c] = *cell.vectors();
    let mut t = [0.0; 3];
    for k in 0..3 {
        t[k] = o[0] as f64 * a[k] + o[1] as f64 * b[k] + o[2] as f64 * c[k];
    }
    t
}

/// Exhaustive `(v, w, offset, distance)` over offsets in `[-range, range]^3`.
pub fn brute_force_images(
    s: &AtomicStructure,
    r_max: f64,
    range: i32,
) -> Vec<(usize, usize, [i32; 3], f64)> {
    let p = s.positions();
    let offsets: Vec<[i32; 3]> = match s.cell() {
        None => vec![[0, 0, 0]],
        Some(_) => {
            let mut all = Vec::new();
            for a in -range..=range {
                for b in -range..=range {
                    for c in -range..=range {
                        all.push([a, b, c]);
                    }
                }
            }
            all
        }
    };
    let mut out = Vec::new();
    for v in 0..s.len() {
        for w in 0..s.len() {
            for &o in &offsets {
                let target = match s.cell() {
                    Some(cell) if o != [0, 0, 0] => vec3::add(p[w], translation(cell, o)),
                    _ => p[w],
                };
                let d = vec3::norm(vec3::sub(target, p[v]));
                if d > 0.0 && d <= r_max {
                    out.push((v, w, o, d));
                }
            }
        }
    }
    out
}

/// Exhaustive K-nearest edge set `(dst, src, offset)`; `None` when some k-th
/// neighbor lies beyond `max_dist`, where the offset window may be incomplete.
pub fn brute_force_knearest(
    s: &AtomicStructure,
    k: usize,
    max_dist: f64,
) -> Option<BTreeSet<(usize, usize, [i32; 3])>> {
    let all = brute_force_images(s, f64::MAX, 4);
    let mut by_center: BTreeMap<usize, Vec<(f64, usize, [i32; 3])>> = BTreeMap::new();
    for (v, w, o, d) in all {
        by_center.entry(v).or_default().push((d, w, o));
    }
    let mut out = BTreeSet::new();
    for (v, mut cands) in by_center {
        cands.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        if cands.len() < k || cands[k - 1].0 > max_dist {
            return None;
        }
        for &(_, w, o) in &cands[..k] {
            out.insert((v, w, o));
        }
    }
    Some(out)
}

use edgenet::autodiff::Reduce;
use edgenet::graphs::{build_graph, CutoffPolicy, MolecularGraph, RbfConfig};
use edgenet::model::{loss_and_gradients, predict, ModelConfig, ModelParams};
use rayon::prelude::*;

/// Small architecture for numerical checks.
pub fn small_config(edge_updates: bool, hidden_dim: usize, steps: usize) -> ModelConfig {
    ModelConfig {
        hidden_dim,
        steps,
        edge_updates,
        message_agg: Reduce::Sum,
        readout_agg: Reduce::Sum,
        rbf: RbfConfig::default(),
        n_species: 20,
    }
}

/// Initialised parameters with biases also drawn at random, so every
/// parameter sits away from zero.
pub fn random_params(config: ModelConfig, rng: &mut ChaCha8Rng) -> ModelParams {
    let mut p = ModelParams::init(config, rng.gen()).unwrap();
    for (name, t) in p.iter_mut() {
        if name.contains(".b") {
            for x in t.data_mut() {
                *x = rng.gen_range(-0.5..0.5);
            }
        }
    }
    p
}

pub fn mse(params: &ModelParams, graph: &MolecularGraph, targets: &[f64]) -> f64 {
    let y = predict(params, graph).unwrap();
    y.iter().zip(targets).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64
}

/// Largest `|analytic - numeric| / max(1, |analytic|, |numeric|)` over every
/// entry of every parameter, with central differences of step `h`.
pub fn max_gradient_error(params: &ModelParams, graph: &MolecularGraph, targets: &[f64], h: f64) -> f64 {
    let (_, grads) = loss_and_gradients(params, graph, targets).unwrap();
    let entries: Vec<(String, usize)> = params
        .iter()
        .flat_map(|(name, t)| (0..t.len()).map(move |i| (name.clone(), i)))
        .collect();
    entries
        .par_iter()
        .map(|(name, i)| {
            let mut p = params.clone();
            let x0 = p.get(name).unwrap().data()[*i];
            p.get_mut(name).unwrap().data_mut()[*i] = x0 + h;
            let up = mse(&p, graph, targets);
            p.get_mut(name).unwrap().data_mut()[*i] = x0 - h;
            let down = mse(&p, graph, targets);
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads[name].data()[*i];
            (analytic - numeric).abs() / 1f64.max(analytic.abs()).max(numeric.abs())
        })
        .reduce(|| 0.0, f64::max)
}

/// Random molecule graph with `n` atoms under a 5 Å distance cutoff.
pub fn random_molecule_graph(rng: &mut ChaCha8Rng, n: usize, rbf: &RbfConfig) -> MolecularGraph {
    let s = random_molecule(rng, n, 2.5);
    build_graph(&s, &CutoffPolicy::Distance { r: 5.0 }, rbf).unwrap()
}
