//! Enumeration of interatomic displacements over periodic lattice images.

use std::collections::HashMap;

use super::{vec3, AtomicStructure, StructureError, Vec3};

/// Slack on fractional bounds so rounding never drops a qualifying image.
const BOUND_SLACK: f64 = 1e-9;

/// Atom count above which cell-list binning replaces pairwise enumeration.
const BINNING_THRESHOLD: usize = 24;

/// One ordered pair `(center, neighbor image)` within the cutoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImagePair {
    pub center: usize,
    pub neighbor: usize,
    pub offset: [i32; 3],
    /// `p_neighbor + offset . cell - p_center`
    pub displacement: Vec3,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Auto,
    Pairwise,
    Binned,
}

/// Every ordered pair `(v, w, offset)` with `0 < |p_w + offset.cell - p_v| <= r_max`,
/// sorted by `(v, w, offset)`.
pub fn image_displacements(
    structure: &AtomicStructure,
    r_max: f64,
) -> Result<Vec<ImagePair>, StructureError> {
    image_displacements_using(structure, r_max, Strategy::Auto)
}

pub fn image_displacements_using(
    structure: &AtomicStructure,
    r_max: f64,
    strategy: Strategy,
) -> Result<Vec<ImagePair>, StructureError> {
    if !(r_max > 0.0) || !r_max.is_finite() {
        return Err(StructureError::InvalidCutoff(r_max));
    }
    let binned = match strategy {
        Strategy::Auto => structure.len() > BINNING_THRESHOLD,
        Strategy::Pairwise => false,
        Strategy::Binned => true,
    };
    let mut pairs = if binned {
        binned_pairs(structure, r_max)
    } else {
        pairwise(structure, r_max)
    };
    pairs.sort_by(|a, b| {
        (a.center, a.neighbor, a.offset).cmp(&(b.center, b.neighbor, b.offset))
    });
    Ok(pairs)
}

#[inline]
fn accept(
    structure: &AtomicStructure,
    v: usize,
    w: usize,
    offset: [i32; 3],
    r_max: f64,
    out: &mut Vec<ImagePair>,
) {
    let displacement = structure.displacement(v, w, offset);
    let distance = vec3::norm(displacement);
    if distance > 0.0 && distance <= r_max {
        out.push(ImagePair {
            center: v,
            neighbor: w,
            offset,
            displacement,
            distance,
        });
    }
}

fn pairwise(structure: &AtomicStructure, r_max: f64) -> Vec<ImagePair> {
    let n = structure.len();
    let mut out = Vec::new();
    let Some(cell) = structure.cell() else {
        for v in 0..n {
            for w in 0..n {
                accept(structure, v, w, [0, 0, 0], r_max, &mut out);
            }
        }
        return out;
    };
    let widths = cell.perpendicular_widths();
    let reach = [r_max / widths[0], r_max / widths[1], r_max / widths[2]];
    let frac: Vec<Vec3> = structure
        .positions()
        .iter()
        .map(|&p| cell.to_fractional(p))
        .collect();
    for v in 0..n {
        for w in 0..n {
            let delta = vec3::sub(frac[w], frac[v]);
            let mut lo = [0i32; 3];
            let mut hi = [0i32; 3];
            for k in 0..3 {
                lo[k] = (-reach[k] - delta[k] - BOUND_SLACK).ceil() as i32;
                hi[k] = (reach[k] - delta[k] + BOUND_SLACK).floor() as i32;
            }
            for a in lo[0]..=hi[0] {
                for b in lo[1]..=hi[1] {
                    for c in lo[2]..=hi[2] {
                        accept(structure, v, w, [a, b, c], r_max, &mut out);
                    }
                }
            }
        }
    }
    out
}

type BinKey = (i64, i64, i64);

fn bin_of(p: Vec3, size: f64) -> BinKey {
    (
        (p[0] / size).floor() as i64,
        (p[1] / size).floor() as i64,
        (p[2] / size).floor() as i64,
    )
}

/// Cell-list search: images of wrapped atoms are binned on a cubic grid of
/// edge `r_max`, and each wrapped center inspects its 27 surrounding bins.
fn binned_pairs(structure: &AtomicStructure, r_max: f64) -> Vec<ImagePair> {
    let n = structure.len();
    let bin = r_max * (1.0 + 1e-9);
    // (atom, offset in wrapped frame, wrapped position)
    let mut points: Vec<(usize, [i32; 3], Vec3)> = Vec::new();
    // integer shift s with p = p_wrapped + s.cell
    let mut shifts = vec![[0i32; 3]; n];
    let mut centers: Vec<Vec3> = structure.positions().to_vec();

    match structure.cell() {
        None => {
            for (w, &p) in structure.positions().iter().enumerate() {
                points.push((w, [0, 0, 0], p));
            }
        }
        Some(cell) => {
            let widths = cell.perpendicular_widths();
            let reach = [r_max / widths[0], r_max / widths[1], r_max / widths[2]];
            for (w, &p) in structure.positions().iter().enumerate() {
                let f = cell.to_fractional(p);
                let s = [f[0].floor(), f[1].floor(), f[2].floor()];
                let fw = vec3::sub(f, s);
                shifts[w] = [s[0] as i32, s[1] as i32, s[2] as i32];
                centers[w] = cell.to_cartesian(fw);
                let mut lo = [0i32; 3];
                let mut hi = [0i32; 3];
                for k in 0..3 {
                    lo[k] = (-reach[k] - fw[k] - BOUND_SLACK).ceil() as i32;
                    hi[k] = (1.0 + reach[k] - fw[k] + BOUND_SLACK).floor() as i32;
                }
                for a in lo[0]..=hi[0] {
                    for b in lo[1]..=hi[1] {
                        for c in lo[2]..=hi[2] {
                            let o = [a, b, c];
                            points.push((w, o, vec3::add(centers[w], cell.translation(o))));
                        }
                    }
                }
            }
        }
    }

    let mut bins: HashMap<BinKey, Vec<usize>> = HashMap::new();
    for (i, point) in points.iter().enumerate() {
        bins.entry(bin_of(point.2, bin)).or_default().push(i);
    }

    let mut out = Vec::new();
    for v in 0..n {
        let (bx, by, bz) = bin_of(centers[v], bin);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(members) = bins.get(&(bx + dx, by + dy, bz + dz)) else {
                        continue;
                    };
                    for &i in members {
                        let (w, wrapped_offset, _) = points[i];
                        let offset = [
                            wrapped_offset[0] - shifts[w][0] + shifts[v][0],
                            wrapped_offset[1] - shifts[w][1] + shifts[v][1],
                            wrapped_offset[2] - shifts[w][2] + shifts[v][2],
                        ];
                        accept(structure, v, w, offset, r_max, &mut out);
                    }
                }
            }
        }
    }
    out
}
