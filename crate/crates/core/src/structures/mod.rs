//! Atomic structures, dataset records and periodic image enumeration.

mod crystal_json;
pub mod elements;
mod images;
pub mod properties;
pub mod vec3;
mod xyz;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crystal_json::{parse_crystal_json, write_crystal_json_line};
pub use images::{image_displacements, image_displacements_using, ImagePair, Strategy};
pub use vec3::{Mat3, Vec3};
pub use xyz::parse_xyz;

/// Smallest |det| accepted for a periodic cell, in Å³.
pub const MIN_CELL_VOLUME: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StructureError {
    #[error("structure has no atoms")]
    Empty,
    #[error("{species} species but {positions} positions")]
    LengthMismatch { species: usize, positions: usize },
    #[error("invalid atomic number {0}")]
    InvalidSpecies(u32),
    #[error("non-finite coordinate for atom {0}")]
    NonFinite(usize),
    #[error("singular cell (det = {0:e})")]
    SingularCell(f64),
    #[error("cutoff must be positive, got {0}")]
    InvalidCutoff(f64),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("record {id}: {message}")]
    Record { id: String, message: String },
}

/// Periodic lattice; rows are the lattice vectors in Å.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    vectors: Mat3,
}

impl Cell {
    pub fn new(vectors: Mat3) -> Result<Self, StructureError> {
        if vectors.iter().flatten().any(|x| !x.is_finite()) {
            return Err(StructureError::SingularCell(f64::NAN));
        }
        let d = vec3::det(&vectors);
        if d.abs() <= MIN_CELL_VOLUME {
            return Err(StructureError::SingularCell(d));
        }
        Ok(Self { vectors })
    }

    pub fn cubic(a: f64) -> Result<Self, StructureError> {
        Self::new([[a, 0.0, 0.0], [0.0, a, 0.0], [0.0, 0.0, a]])
    }

    pub fn vectors(&self) -> &Mat3 {
        &self.vectors
    }

    pub fn volume(&self) -> f64 {
        vec3::det(&self.vectors).abs()
    }

    /// Distances between opposite faces of the parallelepiped.
    pub fn perpendicular_widths(&self) -> Vec3 {
        let [a, b, c] = self.vectors;
        let v = self.volume();
        [
            v / vec3::norm(vec3::cross(b, c)),
            v / vec3::norm(vec3::cross(c, a)),
            v / vec3::norm(vec3::cross(a, b)),
        ]
    }

    pub fn to_cartesian(&self, frac: Vec3) -> Vec3 {
        vec3::row_times(frac, &self.vectors)
    }

    pub fn to_fractional(&self, cart: Vec3) -> Vec3 {
        let inv = vec3::inverse(&self.vectors).expect("cell is non-singular");
        vec3::row_times(cart, &inv)
    }

    /// Cartesian translation for an integer lattice offset.
    pub fn translation(&self, offset: [i32; 3]) -> Vec3 {
        self.to_cartesian([offset[0] as f64, offset[1] as f64, offset[2] as f64])
    }
}

/// Species, Cartesian positions and an optional periodic cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStructure", into = "RawStructure")]
pub struct AtomicStructure {
    species: Vec<u32>,
    positions: Vec<Vec3>,
    cell: Option<Cell>,
}

#[derive(Serialize, Deserialize)]
struct RawStructure {
    species: Vec<u32>,
    positions: Vec<Vec3>,
    #[serde(default)]
    cell: Option<Mat3>,
}

impl TryFrom<RawStructure> for AtomicStructure {
    type Error = StructureError;

    fn try_from(raw: RawStructure) -> Result<Self, Self::Error> {
        let cell = raw.cell.map(Cell::new).transpose()?;
        AtomicStructure::new(raw.species, raw.positions, cell)
    }
}

impl From<AtomicStructure> for RawStructure {
    fn from(s: AtomicStructure) -> Self {
        RawStructure {
            species: s.species,
            positions: s.positions,
            cell: s.cell.map(|c| c.vectors),
        }
    }
}

impl AtomicStructure {
    pub fn new(
        species: Vec<u32>,
        positions: Vec<Vec3>,
        cell: Option<Cell>,
    ) -> Result<Self, StructureError> {
        if species.len() != positions.len() {
            return Err(StructureError::LengthMismatch {
                species: species.len(),
                positions: positions.len(),
            });
        }
        if species.is_empty() {
            return Err(StructureError::Empty);
        }
        if let Some(&z) = species.iter().find(|&&z| z == 0) {
            return Err(StructureError::InvalidSpecies(z));
        }
        if let Some(i) = positions
            .iter()
            .position(|p| p.iter().any(|x| !x.is_finite()))
        {
            return Err(StructureError::NonFinite(i));
        }
        Ok(Self {
            species,
            positions,
            cell,
        })
    }

    pub fn molecule(species: Vec<u32>, positions: Vec<Vec3>) -> Result<Self, StructureError> {
        Self::new(species, positions, None)
    }

    pub fn len(&self) -> usize {
        self.species.len()
    }

    pub fn is_empty(&self) -> bool {
        self.species.is_empty()
    }

    pub fn species(&self) -> &[u32] {
        &self.species
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn cell(&self) -> Option<&Cell> {
        self.cell.as_ref()
    }

    pub fn is_periodic(&self) -> bool {
        self.cell.is_some()
    }

    /// Displacement from atom `v` to the image of atom `w` shifted by `offset`.
    #[inline]
    pub fn displacement(&self, v: usize, w: usize, offset: [i32; 3]) -> Vec3 {
        let target = match &self.cell {
            Some(cell) if offset != [0, 0, 0] => {
                vec3::add(self.positions[w], cell.translation(offset))
            }
            _ => self.positions[w],
        };
        vec3::sub(target, self.positions[v])
    }

    /// Apply `x -> R x + t` to every position and rotate the cell vectors.
    pub fn transformed(&self, rotation: &Mat3, translation: Vec3) -> Self {
        let positions = self
            .positions
            .iter()
            .map(|&p| vec3::add(vec3::times_col(rotation, p), translation))
            .collect();
        let cell = self.cell.map(|c| Cell {
            vectors: [
                vec3::times_col(rotation, c.vectors[0]),
                vec3::times_col(rotation, c.vectors[1]),
                vec3::times_col(rotation, c.vectors[2]),
            ],
        });
        Self {
            species: self.species.clone(),
            positions,
            cell,
        }
    }

    /// Reorder atoms so that new atom `i` is old atom `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.len());
        Self {
            species: perm.iter().map(|&i| self.species[i]).collect(),
            positions: perm.iter().map(|&i| self.positions[i]).collect(),
            cell: self.cell,
        }
    }
}

/// A target value tagged with its unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetValue {
    pub value: f64,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub structure: AtomicStructure,
    #[serde(default)]
    pub targets: BTreeMap<String, TargetValue>,
}

impl DatasetRecord {
    pub fn target(&self, name: &str) -> Option<f64> {
        self.targets.get(name).map(|t| t.value)
    }

    pub fn n_atoms(&self) -> usize {
        self.structure.len()
    }
}

/// Insert a registry property, checking the name and the value.
pub fn insert_target(
    targets: &mut BTreeMap<String, TargetValue>,
    name: &str,
    value: f64,
) -> Result<(), String> {
    let prop = properties::lookup(name).ok_or_else(|| format!("unknown property {name:?}"))?;
    if !value.is_finite() {
        return Err(format!("non-finite value for {name}"));
    }
    targets.insert(
        prop.name.to_string(),
        TargetValue {
            value,
            unit: prop.unit.to_string(),
        },
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structure_invariants() {
        assert_eq!(
            AtomicStructure::molecule(vec![], vec![]),
            Err(StructureError::Empty)
        );
        assert!(matches!(
            AtomicStructure::molecule(vec![1, 1], vec![[0.0; 3]]),
            Err(StructureError::LengthMismatch { .. })
        ));
        assert!(matches!(
            AtomicStructure::molecule(vec![1], vec![[f64::NAN, 0.0, 0.0]]),
            Err(StructureError::NonFinite(0))
        ));
        assert!(matches!(
            AtomicStructure::molecule(vec![0], vec![[0.0; 3]]),
            Err(StructureError::InvalidSpecies(0))
        ));
    }

    #[test]
    fn singular_cells_are_rejected() {
        assert!(matches!(
            Cell::new([[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]]),
            Err(StructureError::SingularCell(_))
        ));
        assert!(Cell::new([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 0.0, 1.0]]).is_err());
        assert!(Cell::cubic(2.0).is_ok());
    }

    #[test]
    fn perpendicular_widths_of_skewed_cell() {
        let cell = Cell::new([[2.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 3.0]]).unwrap();
        let w = cell.perpendicular_widths();
        assert!((w[0] - 2f64.sqrt()).abs() < 1e-12);
        assert!((w[1] - 1.0).abs() < 1e-12);
        assert!((w[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn serde_round_trip_validates() {
        let s = AtomicStructure::new(
            vec![11, 17],
            vec![[0.0; 3], [1.0, 1.0, 1.0]],
            Some(Cell::cubic(2.0).unwrap()),
        )
        .unwrap();
        let json = serde_json::to_string(&s).unwrap();
        let back: AtomicStructure = serde_json::from_str(&json).unwrap();
        assert_eq!(s, back);
        let bad = r#"{"species":[1],"positions":[[0,0,0]],"cell":[[0,0,0],[0,1,0],[0,0,1]]}"#;
        assert!(serde_json::from_str::<AtomicStructure>(bad).is_err());
    }
}
