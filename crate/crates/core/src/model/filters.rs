//! First-layer filter responses as a function of distance and species pair.

use std::io::Write;
use std::sync::Arc;

use crate::autodiff::Tensor;
use crate::graphs::rbf_expand;

use super::{ModelError, ModelParams, Network};

/// 0 to 4 Angstrom in steps of 0.05 (81 points).
pub fn default_grid() -> Vec<f64> {
    (0..=80).map(|i| i as f64 / 20.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterPoint {
    pub receiver: u32,
    pub sender: u32,
    pub distance: f64,
    /// One value per filter.
    pub values: Vec<f64>,
    /// `values` minus the average over all species pairs at this distance.
    pub deviation: Vec<f64>,
}

/// Points ordered by receiver, then sender (both in the given species order), then distance.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterTable {
    pub species: Vec<u32>,
    pub grid: Vec<f64>,
    pub n_filters: usize,
    pub points: Vec<FilterPoint>,
}

pub fn export_filters(
    params: &ModelParams,
    species: &[u32],
    grid: &[f64],
) -> Result<FilterTable, ModelError> {
    let config = *params.config();
    if species.is_empty() || grid.is_empty() {
        return Err(ModelError::Config(
            "filter export needs at least one species and one distance".into(),
        ));
    }
    if let Some(&z) = species.iter().find(|&&z| z as usize >= config.n_species) {
        return Err(ModelError::UnknownSpecies {
            z,
            n_species: config.n_species,
        });
    }
    let s = species.len();
    let n_points = s * s * grid.len();
    let mut receivers = Vec::with_capacity(n_points);
    let mut senders = Vec::with_capacity(n_points);
    let mut features = Vec::with_capacity(n_points * config.rbf.dim());
    for &zv in species {
        for &zw in species {
            for &d in grid {
                receivers.push(zv as usize);
                senders.push(zw as usize);
                features.extend(rbf_expand(d, &config.rbf));
            }
        }
    }

    let mut net = Network::new(params);
    let mut e = net
        .tape_mut()
        .leaf(Tensor::new(n_points, config.rbf.dim(), features));
    if config.edge_updates {
        let table = net.param("embedding")?;
        let hv = net.tape_mut().gather_rows(table, Arc::new(receivers))?;
        let hw = net.tape_mut().gather_rows(table, Arc::new(senders))?;
        e = net.edge_mlp(hv, hw, e, 0)?;
    }
    let f = net.filter(e, 0)?;
    let values = net.tape().value(f);
    let c = values.cols();

    let g = grid.len();
    let pairs = (s * s) as f64;
    let mut average = vec![0.0; g * c];
    for p in 0..s * s {
        for (i, avg) in average.chunks_mut(c).enumerate() {
            for (a, v) in avg.iter_mut().zip(values.row(p * g + i)) {
                *a += v;
            }
        }
    }
    average.iter_mut().for_each(|a| *a /= pairs);

    let mut points = Vec::with_capacity(n_points);
    for (a, &zv) in species.iter().enumerate() {
        for (b, &zw) in species.iter().enumerate() {
            for (i, &d) in grid.iter().enumerate() {
                let row = values.row((a * s + b) * g + i).to_vec();
                let deviation = row
                    .iter()
                    .zip(&average[i * c..(i + 1) * c])
                    .map(|(v, m)| v - m)
                    .collect();
                points.push(FilterPoint {
                    receiver: zv,
                    sender: zw,
                    distance: d,
                    values: row,
                    deviation,
                });
            }
        }
    }
    Ok(FilterTable {
        species: species.to_vec(),
        grid: grid.to_vec(),
        n_filters: c,
        points,
    })
}

impl FilterTable {
    pub fn point(&self, receiver: u32, sender: u32, grid_index: usize) -> Option<&FilterPoint> {
        let a = self.species.iter().position(|&z| z == receiver)?;
        let b = self.species.iter().position(|&z| z == sender)?;
        let s = self.species.len();
        self.points.get((a * s + b) * self.grid.len() + grid_index)
    }

    /// Filter indices sorted by their H->H deviation at the grid point
    /// nearest 1.0 Angstrom. `None` without hydrogen in the table.
    pub fn sorted_order(&self) -> Option<Vec<usize>> {
        let nearest = (0..self.grid.len())
            .min_by(|&i, &j| (self.grid[i] - 1.0).abs().total_cmp(&(self.grid[j] - 1.0).abs()))?;
        let hh = self.point(1, 1, nearest)?;
        let mut order: Vec<usize> = (0..self.n_filters).collect();
        order.sort_by(|&i, &j| hh.deviation[i].total_cmp(&hh.deviation[j]).then(i.cmp(&j)));
        Some(order)
    }

    pub fn max_abs_deviation(&self) -> f64 {
        self.points
            .iter()
            .flat_map(|p| p.deviation.iter())
            .fold(0.0, |m, d| m.max(d.abs()))
    }

    /// CSV with header `receiver_Z,sender_Z,distance,filter_index,value,deviation`.
    /// Filters appear in [`sorted_order`](Self::sorted_order) when hydrogen is present.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let order = self
            .sorted_order()
            .unwrap_or_else(|| (0..self.n_filters).collect());
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["receiver_Z", "sender_Z", "distance", "filter_index", "value", "deviation"])?;
        for p in &self.points {
            for &j in &order {
                out.write_record([
                    p.receiver.to_string(),
                    p.sender.to_string(),
                    p.distance.to_string(),
                    j.to_string(),
                    p.values[j].to_string(),
                    p.deviation[j].to_string(),
                ])?;
            }
        }
        out.flush()
    }
}
