//! JSON-lines crystal records (Materials Project / OQMD style exports).

use std::collections::BTreeMap;

use serde::Deserialize;
use serde_json::json;

use super::{
    elements, insert_target, vec3::Vec3, AtomicStructure, Cell, DatasetRecord, StructureError,
};

#[derive(Deserialize)]
struct CrystalLine {
    id: Option<String>,
    lattice: [[f64; 3]; 3],
    species: Vec<String>,
    frac_coords: Option<Vec<Vec<f64>>>,
    cart_coords: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    targets: BTreeMap<String, f64>,
}

fn record_error(id: &str, message: impl Into<String>) -> StructureError {
    StructureError::Record {
        id: id.to_string(),
        message: message.into(),
    }
}

fn coords(rows: &[Vec<f64>], n: usize, id: &str) -> Result<Vec<Vec3>, StructureError> {
    if rows.len() != n {
        return Err(record_error(
            id,
            format!("{n} species but {} coordinate rows", rows.len()),
        ));
    }
    rows.iter()
        .enumerate()
        .map(|(i, r)| match r.as_slice() {
            [x, y, z] => Ok([*x, *y, *z]),
            _ => Err(record_error(
                id,
                format!("coordinate row {i} has {} components", r.len()),
            )),
        })
        .collect()
}

fn parse_line(line: &str, line_no: usize) -> Result<DatasetRecord, StructureError> {
    let fallback_id = format!("line{line_no}");
    let raw: CrystalLine =
        serde_json::from_str(line).map_err(|e| record_error(&fallback_id, e.to_string()))?;
    let id = raw.id.unwrap_or(fallback_id);

    let cell = Cell::new(raw.lattice).map_err(|_| record_error(&id, "singular cell"))?;
    let species = raw
        .species
        .iter()
        .map(|s| {
            elements::atomic_number(s)
                .ok_or_else(|| record_error(&id, format!("unknown element {s:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let n = species.len();
    let positions = match (&raw.frac_coords, &raw.cart_coords) {
        (Some(frac), None) => coords(frac, n, &id)?
            .into_iter()
            .map(|f| cell.to_cartesian(f))
            .collect(),
        (None, Some(cart)) => coords(cart, n, &id)?,
        (Some(_), Some(_)) => {
            return Err(record_error(&id, "both frac_coords and cart_coords given"))
        }
        (None, None) => return Err(record_error(&id, "missing coordinates")),
    };
    let structure =
        AtomicStructure::new(species, positions, Some(cell)).map_err(|e| record_error(&id, e.to_string()))?;

    let mut targets = BTreeMap::new();
    for (name, value) in &raw.targets {
        insert_target(&mut targets, name, *value).map_err(|m| record_error(&id, m))?;
    }
    Ok(DatasetRecord {
        id,
        structure,
        targets,
    })
}

/// Parse one crystal record per non-blank line.
pub fn parse_crystal_json(text: &str) -> Result<Vec<DatasetRecord>, StructureError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_line(l, i + 1))
        .collect()
}

/// Serialize a periodic record back to the JSON-lines crystal format
/// (Cartesian coordinates).
pub fn write_crystal_json_line(record: &DatasetRecord) -> Option<String> {
    let cell = record.structure.cell()?;
    let species: Vec<&str> = record
        .structure
        .species()
        .iter()
        .map(|&z| elements::symbol(z).unwrap_or("X"))
        .collect();
    let targets: BTreeMap<&str, f64> = record
        .targets
        .iter()
        .map(|(k, v)| (k.as_str(), v.value))
        .collect();
    Some(
        json!({
            "id": record.id,
            "lattice": cell.vectors(),
            "species": species,
            "cart_coords": record.structure.positions(),
            "targets": targets,
        })
        .to_string(),
    )
}
