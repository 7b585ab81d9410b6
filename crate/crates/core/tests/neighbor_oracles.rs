//! Neighbor lists and graph builders checked against exhaustive enumeration.

mod common;

use std::collections::BTreeSet;

use edgenet::graphs::voronoi::voronoi_cells;
use edgenet::graphs::{build_graph, CutoffPolicy, RbfConfig};
use edgenet::structures::vec3::{self, rotation};
use edgenet::structures::{image_displacements, AtomicStructure, Cell};
use proptest::prelude::*;

use common::{brute_force_images, brute_force_knearest, random_periodic, seeded};

#[test]
fn single_atom_cubic_matches_brute_force() {
    let s = AtomicStructure::new(vec![84], vec![[0.0; 3]], Some(Cell::cubic(2.0).unwrap())).unwrap();
    let oracle = brute_force_images(&s, 2.5, 2);
    assert_eq!(oracle.len(), 6);
    let fast: BTreeSet<_> = image_displacements(&s, 2.5)
        .unwrap()
        .iter()
        .map(|p| (p.center, p.neighbor, p.offset))
        .collect();
    let oracle: BTreeSet<_> = oracle.iter().map(|&(v, w, o, _)| (v, w, o)).collect();
    assert_eq!(fast, oracle);
}

#[test]
fn distance_policy_matches_brute_force_on_random_cells() {
    let mut rng = seeded(11);
    for _ in 0..100 {
        let (s, w_min) = random_periodic(&mut rng, 8);
        let r = 2.9 * w_min * rand::Rng::gen_range(&mut rng, 0.3..1.0);
        let g = build_graph(&s, &CutoffPolicy::Distance { r }, &RbfConfig::default()).unwrap();
        let got: BTreeSet<_> = g.edges().iter().map(|e| (e.dst, e.src, e.offset)).collect();
        let oracle = brute_force_images(&s, r, 4);
        let want: BTreeSet<_> = oracle.iter().map(|&(v, w, o, _)| (v, w, o)).collect();
        assert_eq!(got, want);
        assert_eq!(got.len(), g.n_edges(), "duplicate edges");
    }
}

#[test]
fn image_displacements_are_symmetric_and_rigid() {
    let mut rng = seeded(12);
    for _ in 0..30 {
        let (s, w_min) = random_periodic(&mut rng, 6);
        let r = 2.5 * w_min;
        let pairs = image_displacements(&s, r).unwrap();
        let set: BTreeSet<_> = pairs.iter().map(|p| (p.center, p.neighbor, p.offset)).collect();
        for p in &pairs {
            let back = (p.neighbor, p.center, [-p.offset[0], -p.offset[1], -p.offset[2]]);
            assert!(set.contains(&back), "missing reverse of {p:?}");
        }
        let rot = rotation([0.3, -1.0, 0.7], 1.1);
        let moved = s.transformed(&rot, [4.0, -2.5, 0.5]);
        let mut d0: Vec<f64> = pairs.iter().map(|p| p.distance).collect();
        let mut d1: Vec<f64> = image_displacements(&moved, r)
            .unwrap()
            .iter()
            .map(|p| p.distance)
            .collect();
        assert_eq!(d0.len(), d1.len());
        d0.sort_by(f64::total_cmp);
        d1.sort_by(f64::total_cmp);
        for (a, b) in d0.iter().zip(&d1) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn knearest_matches_brute_force_on_random_cells() {
    let mut rng = seeded(13);
    let mut checked = 0;
    while checked < 100 {
        let (s, w_min) = random_periodic(&mut rng, 8);
        let k = rand::Rng::gen_range(&mut rng, 1..=12);
        let Some(want) = brute_force_knearest(&s, k, 3.0 * w_min) else {
            continue;
        };
        let g = build_graph(&s, &CutoffPolicy::KNearest { k }, &RbfConfig::default()).unwrap();
        assert!(g.in_degrees().iter().all(|&d| d == k));
        let got: BTreeSet<_> = g.edges().iter().map(|e| (e.dst, e.src, e.offset)).collect();
        assert_eq!(got, want);
        checked += 1;
    }
}

fn coordination(s: &AtomicStructure) -> Vec<usize> {
    let g = build_graph(s, &CutoffPolicy::Voronoi, &RbfConfig::default()).unwrap();
    g.in_degrees()
}

#[test]
fn voronoi_textbook_coordinations() {
    let sc = AtomicStructure::new(vec![84], vec![[0.0; 3]], Some(Cell::cubic(3.3).unwrap())).unwrap();
    assert_eq!(coordination(&sc), vec![6]);

    let a = 2.87;
    let bcc = AtomicStructure::new(
        vec![26, 26],
        vec![[0.0; 3], [a / 2.0; 3]],
        Some(Cell::cubic(a).unwrap()),
    )
    .unwrap();
    assert_eq!(coordination(&bcc), vec![14, 14]);

    let a = 3.61;
    let fcc_primitive = AtomicStructure::new(
        vec![29],
        vec![[0.0; 3]],
        Some(Cell::new([[0.0, a / 2.0, a / 2.0], [a / 2.0, 0.0, a / 2.0], [a / 2.0, a / 2.0, 0.0]]).unwrap()),
    )
    .unwrap();
    assert_eq!(coordination(&fcc_primitive), vec![12]);

    let fcc_conventional = AtomicStructure::new(
        vec![29; 4],
        vec![[0.0; 3], [0.0, a / 2.0, a / 2.0], [a / 2.0, 0.0, a / 2.0], [a / 2.0, a / 2.0, 0.0]],
        Some(Cell::cubic(a).unwrap()),
    )
    .unwrap();
    assert_eq!(coordination(&fcc_conventional), vec![12; 4]);

    // diamond: 4 nearest + 12 second neighbours
    let a = 5.43;
    let mut positions = Vec::new();
    for base in [[0.0, 0.0, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]] {
        positions.push(vec3::scale(base, a));
        positions.push(vec3::scale(vec3::add(base, [0.25; 3]), a));
    }
    let diamond = AtomicStructure::new(vec![14; 8], positions, Some(Cell::cubic(a).unwrap())).unwrap();
    assert_eq!(coordination(&diamond), vec![16; 8]);
}

#[test]
fn voronoi_is_symmetric_and_fills_space() {
    let mut rng = seeded(14);
    for _ in 0..50 {
        let (s, _) = random_periodic(&mut rng, 8);
        let cells = voronoi_cells(&s).unwrap();
        let volume: f64 = cells.iter().map(|c| c.volume).sum();
        let cell_volume = s.cell().unwrap().volume();
        assert!(
            (volume - cell_volume).abs() < 1e-8 * cell_volume,
            "{volume} vs {cell_volume}"
        );
        assert!(cells.iter().all(|c| !c.unbounded));

        let g = build_graph(&s, &CutoffPolicy::Voronoi, &RbfConfig::default()).unwrap();
        let set: BTreeSet<_> = g.edges().iter().map(|e| (e.src, e.dst, e.offset)).collect();
        for e in g.edges() {
            let back = (e.dst, e.src, [-e.offset[0], -e.offset[1], -e.offset[2]]);
            assert!(set.contains(&back), "asymmetric Voronoi edge {e:?}");
        }
        // neighbours lie within twice the circumradius of the clipped cell
        for (v, c) in cells.iter().enumerate() {
            for f in &c.neighbors {
                let d = vec3::norm(s.displacement(v, f.neighbor, f.offset));
                assert!(d <= 2.0 * c.max_vertex_distance * (1.0 + 1e-9));
            }
        }
    }
}

#[test]
fn voronoi_finite_molecule_keeps_real_faces() {
    let water = AtomicStructure::molecule(
        vec![8, 1, 1],
        vec![[0.0, 0.0, 0.0], [0.9572, 0.0, 0.0], [-0.2399, 0.9266, 0.0]],
    )
    .unwrap();
    let g = build_graph(&water, &CutoffPolicy::Voronoi, &RbfConfig::default()).unwrap();
    assert_eq!(g.unbounded_cells(), 3);
    assert_eq!(g.n_edges(), 6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn binned_and_pairwise_searches_agree(
        seed in 0u64..10_000,
        n in 1usize..40,
        scale in 0.3f64..1.5,
    ) {
        use edgenet::structures::{image_displacements_using, Strategy};
        let mut rng = seeded(seed);
        let (s, w_min) = random_periodic(&mut rng, n);
        let r = scale * 2.0 * w_min;
        let a = image_displacements_using(&s, r, Strategy::Pairwise).unwrap();
        let b = image_displacements_using(&s, r, Strategy::Binned).unwrap();
        prop_assert_eq!(a, b);
    }
}
