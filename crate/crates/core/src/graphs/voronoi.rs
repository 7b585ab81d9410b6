//! Per-atom Voronoi cells by successive half-space clipping.
//!
//! Each cell starts as an axis-aligned box around the center atom and is cut
//! by the perpendicular bisector plane of every candidate neighbor, nearest
//! first. Clipping stops once the next candidate is farther than twice the
//! largest vertex distance, since its bisector can no longer reach the cell.

use crate::structures::vec3::{self, Vec3};
use crate::structures::{image_displacements, AtomicStructure};

use super::GraphError;

/// Faces smaller than this (Å²) are treated as point or edge contacts.
pub const MIN_FACE_AREA: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceTag {
    /// One of the six bounding-box walls.
    Wall(u8),
    /// Bisector with the candidate at this index.
    Candidate(usize),
}

#[derive(Debug, Clone)]
struct Face {
    tag: FaceTag,
    /// Plane `normal . x = offset`, inside is `<=`; `normal` is not normalized.
    normal: Vec3,
    offset: f64,
    vertices: Vec<Vec3>,
}

/// A neighbor image around the center, given by its displacement from the center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub neighbor: usize,
    pub offset: [i32; 3],
    pub displacement: Vec3,
}

impl Candidate {
    pub fn distance(&self) -> f64 {
        vec3::norm(self.displacement)
    }
}

/// Axis-aligned box relative to the center atom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lo: Vec3,
    pub hi: Vec3,
}

impl Bounds {
    pub fn cube(half: f64) -> Self {
        Self {
            lo: [-half; 3],
            hi: [half; 3],
        }
    }

    fn scale(&self) -> f64 {
        (0..3)
            .map(|k| self.hi[k].abs().max(self.lo[k].abs()))
            .fold(1.0, f64::max)
    }
}

/// Convex polyhedron containing the origin (the center atom).
#[derive(Debug, Clone)]
pub struct ConvexCell {
    faces: Vec<Face>,
    eps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellFace {
    pub tag: FaceTag,
    pub area: f64,
}

fn polygon_area(points: &[Vec3]) -> f64 {
    if points.len() < 3 {
        return 0.0;
    }
    let p0 = points[0];
    let mut acc = [0.0; 3];
    for w in points[1..].windows(2) {
        acc = vec3::add(acc, vec3::cross(vec3::sub(w[0], p0), vec3::sub(w[1], p0)));
    }
    0.5 * vec3::norm(acc)
}

impl ConvexCell {
    pub fn from_bounds(bounds: Bounds) -> Self {
        let [x0, y0, z0] = bounds.lo;
        let [x1, y1, z1] = bounds.hi;
        let wall = |i: u8, normal: Vec3, offset: f64, vertices: Vec<Vec3>| Face {
            tag: FaceTag::Wall(i),
            normal,
            offset,
            vertices,
        };
        let faces = vec![
            wall(0, [-1.0, 0.0, 0.0], -x0, vec![[x0, y0, z0], [x0, y0, z1], [x0, y1, z1], [x0, y1, z0]]),
            wall(1, [1.0, 0.0, 0.0], x1, vec![[x1, y0, z0], [x1, y1, z0], [x1, y1, z1], [x1, y0, z1]]),
            wall(2, [0.0, -1.0, 0.0], -y0, vec![[x0, y0, z0], [x1, y0, z0], [x1, y0, z1], [x0, y0, z1]]),
            wall(3, [0.0, 1.0, 0.0], y1, vec![[x0, y1, z0], [x0, y1, z1], [x1, y1, z1], [x1, y1, z0]]),
            wall(4, [0.0, 0.0, -1.0], -z0, vec![[x0, y0, z0], [x0, y1, z0], [x1, y1, z0], [x1, y0, z0]]),
            wall(5, [0.0, 0.0, 1.0], z1, vec![[x0, y0, z1], [x1, y0, z1], [x1, y1, z1], [x0, y1, z1]]),
        ];
        Self {
            faces,
            eps: 1e-10 * bounds.scale(),
        }
    }

    pub fn max_vertex_distance(&self) -> f64 {
        self.faces
            .iter()
            .flat_map(|f| f.vertices.iter())
            .map(|&v| vec3::norm(v))
            .fold(0.0, f64::max)
    }

    pub fn faces(&self) -> impl Iterator<Item = CellFace> + '_ {
        self.faces.iter().map(|f| CellFace {
            tag: f.tag,
            area: polygon_area(&f.vertices),
        })
    }

    pub fn volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| polygon_area(&f.vertices) * f.offset / vec3::norm(f.normal) / 3.0)
            .sum()
    }

    /// Cut away `{x : normal . x > offset}`. Returns whether the cell changed.
    pub fn clip(&mut self, normal: Vec3, offset: f64, tag: FaceTag) -> bool {
        let len = vec3::norm(normal);
        let eps = self.eps;
        let side = |x: Vec3| (vec3::dot(normal, x) - offset) / len;
        let cuts = self
            .faces
            .iter()
            .flat_map(|f| f.vertices.iter())
            .any(|&v| side(v) > eps);
        if !cuts {
            return false;
        }

        let mut on_plane: Vec<Vec3> = Vec::new();
        let mut kept = Vec::with_capacity(self.faces.len() + 1);
        for face in self.faces.drain(..) {
            let n = face.vertices.len();
            let sides: Vec<f64> = face.vertices.iter().map(|&v| side(v)).collect();
            let mut clipped = Vec::with_capacity(n + 1);
            for i in 0..n {
                let (a, sa) = (face.vertices[i], sides[i]);
                let j = (i + 1) % n;
                let (b, sb) = (face.vertices[j], sides[j]);
                if sa <= eps {
                    clipped.push(a);
                    if sa >= -eps {
                        on_plane.push(a);
                    }
                }
                if (sa < -eps && sb > eps) || (sa > eps && sb < -eps) {
                    // interpolate from the inside vertex so both faces sharing
                    // this edge produce the same point
                    let (p, sp, q, sq) = if sa < 0.0 { (a, sa, b, sb) } else { (b, sb, a, sa) };
                    let t = sp / (sp - sq);
                    let x = vec3::add(p, vec3::scale(vec3::sub(q, p), t));
                    clipped.push(x);
                    on_plane.push(x);
                }
            }
            dedup_ring(&mut clipped, eps);
            if clipped.len() >= 3 {
                kept.push(Face {
                    vertices: clipped,
                    ..face
                });
            }
        }

        let ring = order_on_plane(on_plane, normal, eps);
        if ring.len() >= 3 {
            kept.push(Face {
                tag,
                normal,
                offset,
                vertices: ring,
            });
        }
        self.faces = kept;
        true
    }

    /// Clip by the bisector between the origin and `displacement`.
    pub fn clip_bisector(&mut self, displacement: Vec3, tag: FaceTag) -> bool {
        let offset = 0.5 * vec3::dot(displacement, displacement);
        self.clip(displacement, offset, tag)
    }
}

fn dedup_ring(points: &mut Vec<Vec3>, eps: f64) {
    let close = |a: Vec3, b: Vec3| vec3::norm(vec3::sub(a, b)) <= 10.0 * eps;
    points.dedup_by(|a, b| close(*a, *b));
    while points.len() > 1 && close(points[0], points[points.len() - 1]) {
        points.pop();
    }
}

/// Unique points on a plane, sorted by angle around their centroid.
fn order_on_plane(points: Vec<Vec3>, normal: Vec3, eps: f64) -> Vec<Vec3> {
    let mut unique: Vec<Vec3> = Vec::new();
    for p in points {
        if !unique
            .iter()
            .any(|&q| vec3::norm(vec3::sub(p, q)) <= 10.0 * eps)
        {
            unique.push(p);
        }
    }
    if unique.len() < 3 {
        return unique;
    }
    let n = vec3::scale(normal, 1.0 / vec3::norm(normal));
    let helper = if n[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let u = vec3::cross(n, helper);
    let u = vec3::scale(u, 1.0 / vec3::norm(u));
    let v = vec3::cross(n, u);
    let count = unique.len() as f64;
    let centroid = vec3::scale(
        unique.iter().fold([0.0; 3], |acc, &p| vec3::add(acc, p)),
        1.0 / count,
    );
    let mut keyed: Vec<(f64, Vec3)> = unique
        .into_iter()
        .map(|p| {
            let d = vec3::sub(p, centroid);
            (vec3::dot(d, v).atan2(vec3::dot(d, u)), p)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    keyed.into_iter().map(|(_, p)| p).collect()
}

/// A face-sharing neighbor image and the shared face area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceNeighbor {
    pub neighbor: usize,
    pub offset: [i32; 3],
    pub area: f64,
}

/// Result of tessellating around one atom.
#[derive(Debug, Clone, PartialEq)]
pub struct VoronoiCell {
    pub neighbors: Vec<FaceNeighbor>,
    /// The cell still touches the bounding box (hull atom of a finite structure).
    pub unbounded: bool,
    pub volume: f64,
    pub max_vertex_distance: f64,
    /// Candidates beyond `2 * max_vertex_distance` were not needed.
    pub complete: bool,
}

/// Clip a cell around the origin against `candidates` (any order) and report
/// the candidates owning a face of positive area.
pub fn voronoi_neighbors(candidates: &[Candidate], bounds: Bounds) -> VoronoiCell {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        let (ca, cb) = (&candidates[a], &candidates[b]);
        ca.distance()
            .total_cmp(&cb.distance())
            .then((ca.neighbor, ca.offset).cmp(&(cb.neighbor, cb.offset)))
    });

    let mut cell = ConvexCell::from_bounds(bounds);
    let mut reach = cell.max_vertex_distance();
    let mut complete = false;
    for &i in &order {
        let c = &candidates[i];
        if c.distance() > 2.0 * reach * (1.0 + 1e-12) {
            complete = true;
            break;
        }
        if cell.clip_bisector(c.displacement, FaceTag::Candidate(i)) {
            reach = cell.max_vertex_distance();
        }
    }

    let mut neighbors = Vec::new();
    let mut unbounded = false;
    for face in cell.faces() {
        if face.area < MIN_FACE_AREA {
            continue;
        }
        match face.tag {
            FaceTag::Candidate(i) => neighbors.push(FaceNeighbor {
                neighbor: candidates[i].neighbor,
                offset: candidates[i].offset,
                area: face.area,
            }),
            FaceTag::Wall(_) => unbounded = true,
        }
    }
    neighbors.sort_by_key(|f| (f.neighbor, f.offset));
    VoronoiCell {
        neighbors,
        unbounded,
        volume: cell.volume(),
        max_vertex_distance: reach,
        complete,
    }
}

fn collinear(structure: &AtomicStructure) -> bool {
    let p = structure.positions();
    let origin = p[0];
    let Some(dir) = p
        .iter()
        .map(|&q| vec3::sub(q, origin))
        .find(|d| vec3::norm(*d) > 1e-8)
    else {
        return true;
    };
    p.iter().all(|&q| {
        let d = vec3::sub(q, origin);
        vec3::norm(vec3::cross(d, dir)) <= 1e-8 * vec3::norm(dir).max(1.0) * vec3::norm(d).max(1.0)
    })
}

/// Voronoi cells for every atom, searching periodic images as far as needed.
pub fn voronoi_cells(structure: &AtomicStructure) -> Result<Vec<VoronoiCell>, GraphError> {
    let n = structure.len();
    match structure.cell() {
        None => {
            if n < 2 {
                return Err(GraphError::DegenerateVoronoi(
                    "a finite structure needs at least 2 atoms".into(),
                ));
            }
            if n > 2 && collinear(structure) {
                return Err(GraphError::DegenerateVoronoi("all atoms are collinear".into()));
            }
            let p = structure.positions();
            let mut lo = p[0];
            let mut hi = p[0];
            for q in p {
                for k in 0..3 {
                    lo[k] = lo[k].min(q[k]);
                    hi[k] = hi[k].max(q[k]);
                }
            }
            let extent = (0..3).map(|k| hi[k] - lo[k]).fold(1.0, f64::max);
            let mid = vec3::scale(vec3::add(lo, hi), 0.5);
            Ok((0..n)
                .map(|v| {
                    let rel = vec3::sub(mid, p[v]);
                    let bounds = Bounds {
                        lo: vec3::sub(rel, [extent; 3]),
                        hi: vec3::add(rel, [extent; 3]),
                    };
                    let candidates: Vec<Candidate> = (0..n)
                        .filter(|&w| w != v)
                        .map(|w| Candidate {
                            neighbor: w,
                            offset: [0, 0, 0],
                            displacement: structure.displacement(v, w, [0, 0, 0]),
                        })
                        .filter(|c| c.distance() > 0.0)
                        .collect();
                    voronoi_neighbors(&candidates, bounds)
                })
                .collect())
        }
        Some(cell) => {
            let [a, b, c] = *cell.vectors();
            // The cell of an atom lies inside the Wigner-Seitz cell of its own
            // lattice, which the covering radius bounds.
            let half = 0.5 * (vec3::norm(a) + vec3::norm(b) + vec3::norm(c)) * (1.0 + 1e-6);
            let bounds = Bounds::cube(half);
            let mut radius = 2.5 * (cell.volume() / n as f64).cbrt();
            let mut cells: Vec<Option<VoronoiCell>> = vec![None; n];
            loop {
                let pairs = image_displacements(structure, radius)?;
                let mut pending = false;
                for v in 0..n {
                    if cells[v].is_some() {
                        continue;
                    }
                    let candidates: Vec<Candidate> = pairs
                        .iter()
                        .filter(|p| p.center == v)
                        .map(|p| Candidate {
                            neighbor: p.neighbor,
                            offset: p.offset,
                            displacement: p.displacement,
                        })
                        .collect();
                    let result = voronoi_neighbors(&candidates, bounds);
                    if result.complete || 2.0 * result.max_vertex_distance <= radius {
                        cells[v] = Some(result);
                    } else {
                        pending = true;
                    }
                }
                if !pending {
                    break;
                }
                radius *= 1.5;
            }
            Ok(cells.into_iter().map(|c| c.expect("all cells resolved")).collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structures::Cell;

    #[test]
    fn box_volume_and_clip() {
        let mut cell = ConvexCell::from_bounds(Bounds::cube(1.0));
        assert!((cell.volume() - 8.0).abs() < 1e-12);
        assert!(cell.clip([1.0, 0.0, 0.0], 0.5, FaceTag::Candidate(0)));
        assert!((cell.volume() - 6.0).abs() < 1e-12);
        // plane outside the cell
        assert!(!cell.clip([1.0, 0.0, 0.0], 0.7, FaceTag::Candidate(1)));
        // corner cut
        assert!(cell.clip([1.0, 1.0, 1.0], 2.0, FaceTag::Candidate(2)));
        assert_eq!(cell.faces().count(), 7);
    }

    #[test]
    fn simple_cubic_has_six_faces() {
        let s = AtomicStructure::new(vec![84], vec![[0.0; 3]], Some(Cell::cubic(2.0).unwrap()))
            .unwrap();
        let cells = voronoi_cells(&s).unwrap();
        assert_eq!(cells[0].neighbors.len(), 6);
        assert!((cells[0].volume - 8.0).abs() < 1e-9);
        assert!(!cells[0].unbounded);
    }

    #[test]
    fn two_atom_molecule_is_unbounded() {
        let s = AtomicStructure::molecule(vec![1, 1], vec![[0.0; 3], [0.74, 0.0, 0.0]]).unwrap();
        let cells = voronoi_cells(&s).unwrap();
        assert!(cells.iter().all(|c| c.unbounded));
        assert_eq!(cells[0].neighbors.len(), 1);
        assert_eq!(cells[1].neighbors[0].neighbor, 0);
    }

    #[test]
    fn degenerate_finite_inputs() {
        let one = AtomicStructure::molecule(vec![1], vec![[0.0; 3]]).unwrap();
        assert!(matches!(voronoi_cells(&one), Err(GraphError::DegenerateVoronoi(_))));
        let line = AtomicStructure::molecule(
            vec![1, 1, 1],
            vec![[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]],
        )
        .unwrap();
        assert!(matches!(voronoi_cells(&line), Err(GraphError::DegenerateVoronoi(_))));
    }
}
