use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TrainingError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitPreset {
    /// 110000 train, 10000 validation, remainder test.
    Qm9,
    /// 60000 train, 5000 validation, remainder test.
    MaterialsProject,
    /// 20% test, 5000 validation, remainder train.
    Oqmd,
    /// 80/10/10.
    Fractions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitPreset {
    /// Sizes for `n` records. Fixed-size presets shrink proportionally when
    /// the dataset is smaller than their nominal total.
    pub fn sizes(self, n: usize) -> SplitSizes {
        let scaled = |train: usize, val: usize, nominal_total: usize| {
            if n >= nominal_total {
                SplitSizes {
                    train,
                    val,
                    test: n - train - val,
                }
            } else {
                let train = train * n / nominal_total;
                let val = val * n / nominal_total;
                SplitSizes {
                    train,
                    val,
                    test: n - train - val,
                }
            }
        };
        match self {
            SplitPreset::Qm9 => scaled(110_000, 10_000, 130_831),
            SplitPreset::MaterialsProject => scaled(60_000, 5_000, 69_539),
            SplitPreset::Oqmd => {
                let test = n / 5;
                let val = 5_000.min((n - test) / 10);
                SplitSizes {
                    train: n - test - val,
                    val,
                    test,
                }
            }
            SplitPreset::Fractions => {
                let val = n / 10;
                let test = n / 10;
                SplitSizes {
                    train: n - val - test,
                    val,
                    test,
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Splits {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

/// Seeded shuffle of `ids` cut into consecutive train/val/test blocks.
pub fn random_split(ids: &[String], sizes: SplitSizes, seed: u64) -> Result<Splits, TrainingError> {
    if sizes.train + sizes.val + sizes.test > ids.len() {
        return Err(TrainingError::Config(format!(
            "split sizes {sizes:?} exceed {} records",
            ids.len()
        )));
    }
    let unique: BTreeSet<&String> = ids.iter().collect();
    if unique.len() != ids.len() {
        return Err(TrainingError::Config("record ids are not unique".into()));
    }
    let mut order: Vec<String> = ids.to_vec();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let val_end = sizes.train + sizes.val;
    Ok(Splits {
        test: order[val_end..val_end + sizes.test].to_vec(),
        val: order[sizes.train..val_end].to_vec(),
        train: order[..sizes.train].to_vec(),
    })
}

pub fn write_ids<W: Write>(mut w: W, ids: &[String]) -> std::io::Result<()> {
    for id in ids {
        writeln!(w, "{id}")?;
    }
    w.flush()
}

/// Newline-delimited ids; blank lines are skipped.
pub fn read_ids<R: BufRead>(r: R) -> std::io::Result<Vec<String>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        let t = line.trim();
        if !t.is_empty() {
            out.push(t.to_string());
        }
    }
    Ok(out)
}
