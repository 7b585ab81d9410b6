//! Directed molecular graphs under a cutoff policy, plus batching.

pub mod cache;
mod policy;
mod rbf;
pub mod voronoi;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::structures::{image_displacements, AtomicStructure, ImagePair, StructureError};

pub use policy::CutoffPolicy;
pub use rbf::{rbf_expand, RbfConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error("invalid cutoff policy: {0}")]
    InvalidPolicy(String),
    #[error("insufficient neighbors: atom {atom} has {available} candidates, need {k}")]
    InsufficientNeighbors { atom: usize, available: usize, k: usize },
    #[error("degenerate Voronoi input: {0}")]
    DegenerateVoronoi(String),
    #[error("cannot batch an empty list of graphs")]
    EmptyBatch,
    #[error("graphs disagree on the RBF configuration")]
    RbfMismatch,
    #[error("empty dataset")]
    EmptyDataset,
}

/// Directed edge `src -> dst`; the sender is the image of `src` shifted by `offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub distance: f64,
    pub offset: [i32; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct MolecularGraph {
    node_species: Vec<u32>,
    edges: Vec<Edge>,
    /// Row-major `edges.len() x rbf.dim()`.
    edge_features: Vec<f64>,
    rbf: RbfConfig,
    segment_ids: Vec<usize>,
    n_graphs: usize,
    unbounded_cells: usize,
}

impl MolecularGraph {
    /// Assemble a graph of one structure from its nodes and edges.
    pub fn from_edges(node_species: Vec<u32>, edges: Vec<Edge>, rbf: RbfConfig) -> Self {
        let dim = rbf.dim();
        let mut edge_features = vec![0.0; edges.len() * dim];
        for (e, row) in edges.iter().zip(edge_features.chunks_mut(dim.max(1))) {
            rbf.expand_into(e.distance, row);
        }
        let n = node_species.len();
        Self {
            node_species,
            edges,
            edge_features,
            rbf,
            segment_ids: vec![0; n],
            n_graphs: 1,
            unbounded_cells: 0,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.node_species.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_graphs(&self) -> usize {
        self.n_graphs
    }

    pub fn node_species(&self) -> &[u32] {
        &self.node_species
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_features(&self) -> &[f64] {
        &self.edge_features
    }

    pub fn edge_feature_row(&self, e: usize) -> &[f64] {
        let dim = self.rbf.dim();
        &self.edge_features[e * dim..(e + 1) * dim]
    }

    pub fn rbf(&self) -> &RbfConfig {
        &self.rbf
    }

    pub fn segment_ids(&self) -> &[usize] {
        &self.segment_ids
    }

    /// Atoms whose Voronoi cell reached the bounding box (finite structures only).
    pub fn unbounded_cells(&self) -> usize {
        self.unbounded_cells
    }

    pub fn sources(&self) -> Vec<usize> {
        self.edges.iter().map(|e| e.src).collect()
    }

    pub fn targets(&self) -> Vec<usize> {
        self.edges.iter().map(|e| e.dst).collect()
    }

    /// Number of edges arriving at each node.
    pub fn in_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n_nodes()];
        for e in &self.edges {
            deg[e.dst] += 1;
        }
        deg
    }

    /// Atoms per graph segment.
    pub fn segment_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_graphs];
        for &s in &self.segment_ids {
            sizes[s] += 1;
        }
        sizes
    }
}

fn edge_from_pair(p: &ImagePair) -> Edge {
    Edge {
        src: p.neighbor,
        dst: p.center,
        distance: p.distance,
        offset: p.offset,
    }
}

fn knearest_edges(structure: &AtomicStructure, k: usize) -> Result<Vec<Edge>, GraphError> {
    let n = structure.len();
    let sort_key = |a: &ImagePair, b: &ImagePair| {
        a.distance
            .total_cmp(&b.distance)
            .then((a.neighbor, a.offset).cmp(&(b.neighbor, b.offset)))
    };
    let pairs = match structure.cell() {
        None => {
            if n - 1 < k {
                return Err(GraphError::InsufficientNeighbors {
                    atom: 0,
                    available: n - 1,
                    k,
                });
            }
            let p = structure.positions();
            let mut diameter: f64 = 0.0;
            for a in p {
                for b in p {
                    diameter = diameter.max(crate::structures::vec3::norm(
                        crate::structures::vec3::sub(*a, *b),
                    ));
                }
            }
            let pairs = image_displacements(structure, diameter * (1.0 + 1e-9) + 1e-9)?;
            // coincident atoms are never candidates
            let mut counts = vec![0usize; n];
            for p in &pairs {
                counts[p.center] += 1;
            }
            if let Some((atom, &available)) = counts.iter().enumerate().find(|(_, &c)| c < k) {
                return Err(GraphError::InsufficientNeighbors { atom, available, k });
            }
            pairs
        }
        Some(cell) => {
            let density_radius = (k as f64 * cell.volume() / n as f64 * 3.0
                / (4.0 * std::f64::consts::PI))
                .cbrt();
            let mut radius = 1.2 * density_radius + 1e-6;
            loop {
                let pairs = image_displacements(structure, radius)?;
                let mut counts = vec![0usize; n];
                for p in &pairs {
                    counts[p.center] += 1;
                }
                if counts.iter().all(|&c| c >= k) {
                    break pairs;
                }
                radius *= 1.5;
            }
        }
    };

    let mut edges = Vec::with_capacity(n * k);
    let mut start = 0;
    while start < pairs.len() {
        let v = pairs[start].center;
        let end = start + pairs[start..].iter().take_while(|p| p.center == v).count();
        let mut group: Vec<&ImagePair> = pairs[start..end].iter().collect();
        group.sort_by(|a, b| sort_key(a, b));
        let mut chosen: Vec<Edge> = group[..k].iter().map(|p| edge_from_pair(p)).collect();
        chosen.sort_by_key(|e| (e.src, e.offset));
        edges.extend(chosen);
        start = end;
    }
    Ok(edges)
}

/// Build the directed graph of `structure` under `policy`.
pub fn build_graph(
    structure: &AtomicStructure,
    policy: &CutoffPolicy,
    rbf: &RbfConfig,
) -> Result<MolecularGraph, GraphError> {
    policy.validate()?;
    let mut unbounded = 0;
    let edges = match *policy {
        CutoffPolicy::Distance { r } => image_displacements(structure, r)?
            .iter()
            .map(edge_from_pair)
            .collect(),
        CutoffPolicy::KNearest { k } => knearest_edges(structure, k)?,
        CutoffPolicy::Voronoi => {
            let cells = voronoi::voronoi_cells(structure)?;
            let mut edges = Vec::new();
            for (v, cell) in cells.iter().enumerate() {
                unbounded += cell.unbounded as usize;
                for f in &cell.neighbors {
                    let d = crate::structures::vec3::norm(structure.displacement(v, f.neighbor, f.offset));
                    edges.push(Edge {
                        src: f.neighbor,
                        dst: v,
                        distance: d,
                        offset: f.offset,
                    });
                }
            }
            edges
        }
    };
    let mut graph = MolecularGraph::from_edges(structure.species().to_vec(), edges, *rbf);
    graph.unbounded_cells = unbounded;
    Ok(graph)
}

/// Build graphs for many structures in parallel, preserving input order.
pub fn build_graphs(
    structures: &[&AtomicStructure],
    policy: &CutoffPolicy,
    rbf: &RbfConfig,
) -> Result<Vec<MolecularGraph>, GraphError> {
    structures
        .par_iter()
        .map(|s| build_graph(s, policy, rbf))
        .collect()
}

/// Disjoint union; node indices of later graphs are shifted and segment ids
/// identify the source graph.
pub fn batch_graphs<'a, I>(graphs: I) -> Result<MolecularGraph, GraphError>
where
    I: IntoIterator<Item = &'a MolecularGraph>,
{
    let mut iter = graphs.into_iter();
    let first = iter.next().ok_or(GraphError::EmptyBatch)?;
    let mut out = first.clone();
    for g in iter {
        if g.rbf != out.rbf {
            return Err(GraphError::RbfMismatch);
        }
        let node_shift = out.n_nodes();
        let seg_shift = out.n_graphs;
        out.node_species.extend_from_slice(&g.node_species);
        out.edges.extend(g.edges.iter().map(|e| Edge {
            src: e.src + node_shift,
            dst: e.dst + node_shift,
            ..*e
        }));
        out.edge_features.extend_from_slice(&g.edge_features);
        out.segment_ids
            .extend(g.segment_ids.iter().map(|s| s + seg_shift));
        out.n_graphs += g.n_graphs;
        out.unbounded_cells += g.unbounded_cells;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GraphStatistics {
    pub mean_incoming_edges: f64,
    pub stddev_incoming_edges: f64,
    pub isolated_atom_count: usize,
    pub atom_count: usize,
    pub unbounded_cells: usize,
}

/// In-degree statistics across every atom of every graph (population stddev).
pub fn graph_statistics<'a, I>(dataset: I) -> Result<GraphStatistics, GraphError>
where
    I: IntoIterator<Item = &'a MolecularGraph>,
{
    let mut degrees = Vec::new();
    let mut unbounded = 0;
    for g in dataset {
        degrees.extend(g.in_degrees());
        unbounded += g.unbounded_cells;
    }
    if degrees.is_empty() {
        return Err(GraphError::EmptyDataset);
    }
    let n = degrees.len() as f64;
    let mean = degrees.iter().sum::<usize>() as f64 / n;
    let var = degrees
        .iter()
        .map(|&d| (d as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    Ok(GraphStatistics {
        mean_incoming_edges: mean,
        stddev_incoming_edges: var.sqrt(),
        isolated_atom_count: degrees.iter().filter(|&&d| d == 0).count(),
        atom_count: degrees.len(),
        unbounded_cells: unbounded,
    })
}

/// Write one `policy,param,mean_incoming,stddev,isolated` row per entry.
pub fn write_statistics_csv<W: std::io::Write>(
    writer: W,
    rows: &[(CutoffPolicy, GraphStatistics)],
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["policy", "param", "mean_incoming", "stddev", "isolated"])?;
    for (policy, stats) in rows {
        w.write_record([
            policy.name().to_string(),
            policy.param(),
            stats.mean_incoming_edges.to_string(),
            stats.stddev_incoming_edges.to_string(),
            stats.isolated_atom_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structures::Cell;

    fn pair(d: f64) -> AtomicStructure {
        AtomicStructure::molecule(vec![1, 1], vec![[0.0; 3], [d, 0.0, 0.0]]).unwrap()
    }

    #[test]
    fn distance_policy_on_a_pair() {
        let g = build_graph(&pair(3.0), &CutoffPolicy::Distance { r: 5.0 }, &RbfConfig::default())
            .unwrap();
        assert_eq!(g.n_edges(), 2);
        assert!(g.edges().iter().all(|e| e.distance == 3.0));
        assert_eq!(g.edge_feature_row(0), rbf_expand(3.0, g.rbf()).as_slice());
    }

    #[test]
    fn knearest_collinear_tie_prefers_lower_index() {
        let s = AtomicStructure::molecule(
            vec![6, 6, 6],
            vec![[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]],
        )
        .unwrap();
        let g = build_graph(&s, &CutoffPolicy::KNearest { k: 1 }, &RbfConfig::default()).unwrap();
        let pairs: Vec<(usize, usize)> = g.edges().iter().map(|e| (e.src, e.dst)).collect();
        assert_eq!(pairs, vec![(1, 0), (0, 1), (1, 2)]);
    }

    #[test]
    fn knearest_needs_enough_atoms() {
        let err = build_graph(&pair(1.0), &CutoffPolicy::KNearest { k: 2 }, &RbfConfig::default())
            .unwrap_err();
        assert!(matches!(err, GraphError::InsufficientNeighbors { k: 2, .. }));
    }

    #[test]
    fn knearest_periodic_in_degree() {
        let s = AtomicStructure::new(vec![84], vec![[0.0; 3]], Some(Cell::cubic(2.0).unwrap()))
            .unwrap();
        for k in [1, 6, 7, 18, 30] {
            let g = build_graph(&s, &CutoffPolicy::KNearest { k }, &RbfConfig::default()).unwrap();
            assert_eq!(g.in_degrees(), vec![k]);
        }
    }

    #[test]
    fn voronoi_simple_cubic_self_images() {
        let s = AtomicStructure::new(vec![84], vec![[0.0; 3]], Some(Cell::cubic(2.0).unwrap()))
            .unwrap();
        let g = build_graph(&s, &CutoffPolicy::Voronoi, &RbfConfig::default()).unwrap();
        assert_eq!(g.n_edges(), 6);
        assert!(g.edges().iter().all(|e| e.src == 0 && (e.distance - 2.0).abs() < 1e-12));
    }

    #[test]
    fn batching() {
        let rbf = RbfConfig::default();
        let policy = CutoffPolicy::Distance { r: 5.0 };
        let a = build_graph(&pair(1.0), &policy, &rbf).unwrap();
        let b = build_graph(
            &AtomicStructure::molecule(vec![8, 1, 1], vec![[0.0; 3], [0.96, 0.0, 0.0], [-0.24, 0.93, 0.0]])
                .unwrap(),
            &policy,
            &rbf,
        )
        .unwrap();
        let batch = batch_graphs([&a, &b]).unwrap();
        assert_eq!(batch.n_nodes(), 5);
        assert_eq!(batch.segment_ids(), &[0, 0, 1, 1, 1]);
        assert_eq!(batch.n_edges(), a.n_edges() + b.n_edges());
        assert_eq!(batch.n_graphs(), 2);
        assert!(batch.edges()[a.n_edges()..].iter().all(|e| e.src >= 2 && e.dst >= 2));

        let single = batch_graphs([&a]).unwrap();
        assert_eq!(single, a);
        assert_eq!(batch_graphs(std::iter::empty()), Err(GraphError::EmptyBatch));

        let other = build_graph(
            &pair(1.0),
            &policy,
            &RbfConfig {
                k_max: 10,
                ..rbf
            },
        )
        .unwrap();
        assert_eq!(batch_graphs([&a, &other]), Err(GraphError::RbfMismatch));
    }

    #[test]
    fn statistics() {
        let rbf = RbfConfig::default();
        let policy = CutoffPolicy::Distance { r: 5.0 };
        let g = build_graph(&pair(3.0), &policy, &rbf).unwrap();
        let s = graph_statistics([&g]).unwrap();
        assert_eq!(s.mean_incoming_edges, 1.0);
        assert_eq!(s.stddev_incoming_edges, 0.0);
        assert_eq!(s.isolated_atom_count, 0);

        let far = build_graph(&pair(6.0), &policy, &rbf).unwrap();
        assert_eq!(graph_statistics([&far]).unwrap().isolated_atom_count, 2);
        assert_eq!(graph_statistics(std::iter::empty()), Err(GraphError::EmptyDataset));

        let mut buf = Vec::new();
        write_statistics_csv(&mut buf, &[(policy, s)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "policy,param,mean_incoming,stddev,isolated\ndistance,5,1,0,0\n");
    }
}
