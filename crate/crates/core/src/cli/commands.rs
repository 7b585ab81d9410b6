use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use crate::graphs::{build_graphs, graph_statistics, write_statistics_csv, CutoffPolicy};
use crate::model::filters::{default_grid, export_filters as model_export_filters};
use crate::model::{Checkpoint, ModelParams};
use crate::structures::elements::{atomic_number, is_noble_gas};
use crate::structures::{parse_crystal_json, parse_xyz, properties, DatasetRecord};
use crate::training::{
    evaluate_predictions, predict_samples, prepare_samples, random_split, read_ids, train as fit,
    write_ids, Control, LogRow, Metrics, NormalizationStats, Sample, SplitPreset, Splits,
    StopReason, TrainOutcome, TrainingError,
};

use super::{CliError, DataFormat, ExperimentConfig};

fn data<E: std::fmt::Display>(context: &Path) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", context.display()))
}

fn training_error(e: TrainingError) -> CliError {
    match e {
        TrainingError::Config(m) => CliError::Usage(m),
        TrainingError::NonFiniteGradient(_) => CliError::Numerical(e.to_string()),
        other => CliError::Data(other.to_string()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(data(dir))?;
    }
    File::create(path).map(BufWriter::new).map_err(data(path))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_all(bytes).and_then(|_| w.flush()).map_err(data(path))
}

/// Output to a file, or stdout when `path` is `None`.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn detect_format(path: &Path, text: &str) -> DataFormat {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("xyz")) {
        return DataFormat::Xyz;
    }
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    match serde_json::from_str::<serde_json::Value>(first) {
        Ok(v) if v.get("structure").is_some() => DataFormat::Records,
        Ok(_) => DataFormat::CrystalJson,
        Err(_) => DataFormat::Xyz,
    }
}

pub fn load_records(path: &Path, format: DataFormat) -> Result<Vec<DatasetRecord>, CliError> {
    let text = fs::read_to_string(path).map_err(data(path))?;
    let format = match format {
        DataFormat::Auto => detect_format(path, &text),
        f => f,
    };
    let records = match format {
        DataFormat::Xyz => parse_xyz(&text).map_err(data(path))?,
        DataFormat::CrystalJson => parse_crystal_json(&text).map_err(data(path))?,
        DataFormat::Records => text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str::<DatasetRecord>(l)
                    .map_err(|e| CliError::Data(format!("{}: line {}: {e}", path.display(), i + 1)))
            })
            .collect::<Result<_, _>>()?,
        DataFormat::Auto => unreachable!("resolved above"),
    };
    if records.is_empty() {
        return Err(CliError::Data(format!("{}: no records", path.display())));
    }
    Ok(records)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IngestFilters {
    pub exclude_noble_gases: bool,
    /// eV/atom
    pub max_formation_energy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub input_records: usize,
    pub excluded_noble_gas: usize,
    pub excluded_formation_energy: usize,
    pub kept: usize,
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

/// Filter records, returning the kept ones and the exclusion counts.
pub fn apply_filters(
    records: Vec<DatasetRecord>,
    filters: &IngestFilters,
) -> (Vec<DatasetRecord>, IngestReport) {
    let mut report = IngestReport {
        input_records: records.len(),
        ..IngestReport::default()
    };
    let kept: Vec<DatasetRecord> = records
        .into_iter()
        .filter(|r| {
            if filters.exclude_noble_gases && r.structure.species().iter().any(|&z| is_noble_gas(z)) {
                report.excluded_noble_gas += 1;
                return false;
            }
            if let (Some(limit), Some(ef)) =
                (filters.max_formation_energy, r.target("formation_energy_per_atom"))
            {
                if ef > limit {
                    report.excluded_formation_energy += 1;
                    return false;
                }
            }
            true
        })
        .collect();
    report.kept = kept.len();
    (kept, report)
}

pub fn ingest(
    input: &Path,
    format: DataFormat,
    out: &Path,
    filters: &IngestFilters,
    split: SplitPreset,
    seed: u64,
) -> Result<IngestReport, CliError> {
    let records = load_records(input, format)?;
    let (kept, mut report) = apply_filters(records, filters);
    fs::create_dir_all(out).map_err(data(out))?;
    let mut lines = String::new();
    for r in &kept {
        lines.push_str(&serde_json::to_string(r).expect("records serialize"));
        lines.push('\n');
    }
    write_file(&out.join("dataset.jsonl"), lines.as_bytes())?;

    let ids: Vec<String> = kept.iter().map(|r| r.id.clone()).collect();
    let splits = random_split(&ids, split.sizes(ids.len()), seed).map_err(training_error)?;
    write_splits(out, &splits)?;
    report.train = splits.train.len();
    report.val = splits.val.len();
    report.test = splits.test.len();
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    write_file(&out.join("report.json"), text.as_bytes())?;
    Ok(report)
}

fn write_splits(dir: &Path, splits: &Splits) -> Result<(), CliError> {
    for (name, ids) in [("train", &splits.train), ("val", &splits.val), ("test", &splits.test)] {
        let path = dir.join(format!("{name}.ids"));
        let mut w = create(&path)?;
        write_ids(&mut w, ids).map_err(data(&path))?;
    }
    Ok(())
}

fn read_id_file(path: &Path) -> Result<Vec<String>, CliError> {
    let f = File::open(path).map_err(data(path))?;
    read_ids(BufReader::new(f)).map_err(data(path))
}

/// Split files next to the dataset, if all three exist.
fn sibling_splits(dataset: &Path) -> Result<Option<Splits>, CliError> {
    let dir = dataset.parent().unwrap_or(Path::new("."));
    let paths: Vec<_> = ["train", "val", "test"]
        .iter()
        .map(|n| dir.join(format!("{n}.ids")))
        .collect();
    if !paths.iter().all(|p| p.is_file()) {
        return Ok(None);
    }
    Ok(Some(Splits {
        train: read_id_file(&paths[0])?,
        val: read_id_file(&paths[1])?,
        test: read_id_file(&paths[2])?,
    }))
}

pub fn graph_stats(
    dataset: &Path,
    format: DataFormat,
    policies: &[CutoffPolicy],
    out: Option<&Path>,
) -> Result<(), CliError> {
    let records = load_records(dataset, format)?;
    let structures: Vec<_> = records.iter().map(|r| &r.structure).collect();
    let mut rows = Vec::new();
    for policy in policies {
        policy.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        let graphs = build_graphs(&structures, policy, &Default::default())
            .map_err(|e| CliError::Data(format!("{policy}: {e}")))?;
        let stats = graph_statistics(&graphs).map_err(|e| CliError::Data(e.to_string()))?;
        rows.push((*policy, stats));
    }
    let w = sink(out)?;
    write_statistics_csv(w, &rows).map_err(|e| CliError::Data(e.to_string()))
}

/// Result of training one configuration on one dataset.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub outcome: TrainOutcome,
    pub splits: Splits,
    pub val: Metrics,
    pub test: Option<Metrics>,
    pub mean_incoming_edges: f64,
    pub checkpoint: Checkpoint,
}

fn select(
    by_id: &BTreeMap<&str, &Sample>,
    ids: &[String],
    split: &str,
) -> Result<Vec<Sample>, CliError> {
    ids.iter()
        .map(|id| {
            by_id
                .get(id.as_str())
                .map(|s| (*s).clone())
                .ok_or_else(|| CliError::Data(format!("{split} split names unknown record {id}")))
        })
        .collect()
}

fn metrics(
    params: &ModelParams,
    samples: &[Sample],
    stats: &NormalizationStats,
    resamples: usize,
    seed: u64,
) -> Result<Metrics, CliError> {
    let pred = predict_samples(params, samples, stats).map_err(training_error)?;
    let targets: Vec<f64> = samples.iter().map(|s| s.target).collect();
    evaluate_predictions(&pred, &targets, resamples, seed).map_err(training_error)
}

/// Build graphs, split, train and evaluate. Splits come from `train.ids`,
/// `val.ids` and `test.ids` beside the dataset when present, otherwise from
/// the configured preset and seed.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    records: &[DatasetRecord],
) -> Result<Experiment, CliError> {
    let samples =
        prepare_samples(records, &cfg.target, &cfg.policy, &cfg.model.rbf).map_err(training_error)?;
    let stats = graph_statistics(samples.iter().map(|s| &s.graph))
        .map_err(|e| CliError::Data(e.to_string()))?;
    let splits = match sibling_splits(&cfg.dataset)? {
        Some(s) => s,
        None => {
            let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
            random_split(&ids, cfg.split.sizes(ids.len()), cfg.train.seed).map_err(training_error)?
        }
    };
    let by_id: BTreeMap<&str, &Sample> = samples.iter().map(|s| (s.id.as_str(), s)).collect();
    let train_set = select(&by_id, &splits.train, "train")?;
    let val_set = select(&by_id, &splits.val, "val")?;
    let test_set = select(&by_id, &splits.test, "test")?;
    if val_set.is_empty() {
        return Err(CliError::Data("validation split is empty".into()));
    }

    let initial = ModelParams::init(cfg.model, cfg.train.seed).map_err(|e| CliError::Usage(e.to_string()))?;
    let outcome = fit(initial, &train_set, &val_set, &cfg.train, &mut |_| Control::Continue)
        .map_err(training_error)?;
    let seed = cfg.train.seed;
    let norm = outcome.normalization;
    let val = metrics(&outcome.params, &val_set, &norm, cfg.bootstrap_samples, seed)?;
    let test = if test_set.is_empty() {
        None
    } else {
        Some(metrics(&outcome.params, &test_set, &norm, cfg.bootstrap_samples, seed)?)
    };
    let unit = properties::lookup(&cfg.target).map(|p| p.unit).unwrap_or("");
    let checkpoint = Checkpoint {
        params: outcome.params.clone(),
        metadata: json!({
            "target": cfg.target,
            "unit": unit,
            "policy": cfg.policy.to_string(),
            "normalization": norm,
            "seed": seed,
            "best_step": outcome.best_step,
            "steps": outcome.steps,
        }),
    };
    Ok(Experiment {
        outcome,
        splits,
        val,
        test,
        mean_incoming_edges: stats.mean_incoming_edges,
        checkpoint,
    })
}

fn metrics_json(target: &str, m: &Metrics) -> serde_json::Value {
    let prop = properties::lookup(target);
    let scale = prop.map_or(1.0, |p| p.report_scale);
    json!({
        "target": target,
        "unit": prop.map_or("", |p| p.unit),
        "report_unit": prop.map_or("", |p| p.report_unit),
        "n": m.n,
        "mae": m.mae,
        "bootstrap_95th": m.bootstrap_95th,
        "bootstrap_samples": m.bootstrap_samples,
        "mae_report": m.mae * scale,
        "bootstrap_95th_report": m.bootstrap_95th * scale,
    })
}

fn param_manifest(params: &ModelParams) -> String {
    let mut s = String::new();
    for (name, t) in params.iter() {
        s.push_str(&format!("{name} {} {}\n", t.rows(), t.cols()));
    }
    s
}

/// Writes `config.toml`, `checkpoint.bin`, `params.txt`, `train_log.csv`,
/// `metrics.json` and the split files into the output directory.
pub fn train(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let records = load_records(&cfg.dataset, cfg.format)?;
    let exp = run_experiment(cfg, &records)?;
    let out = &cfg.output_dir;
    fs::create_dir_all(out).map_err(data(out))?;
    write_file(&out.join("config.toml"), cfg.to_toml().as_bytes())?;
    let ckpt_path = out.join("checkpoint.bin");
    exp.checkpoint.save(&ckpt_path).map_err(data(&ckpt_path))?;
    write_file(&out.join("params.txt"), param_manifest(&exp.checkpoint.params).as_bytes())?;
    let log_path = out.join("train_log.csv");
    LogRow::write_csv(&exp.outcome.log, create(&log_path)?).map_err(data(&log_path))?;
    write_splits(out, &exp.splits)?;
    let mut m = json!({ "val": metrics_json(&cfg.target, &exp.val) });
    if let Some(t) = &exp.test {
        m["test"] = metrics_json(&cfg.target, t);
    }
    write_file(
        &out.join("metrics.json"),
        serde_json::to_string_pretty(&m).expect("json").as_bytes(),
    )?;
    if let StopReason::NonFinite { step, detail } = &exp.outcome.stop {
        return Err(CliError::Numerical(format!(
            "training diverged at step {step} ({detail}); best checkpoint kept"
        )));
    }
    Ok(())
}

fn meta_str<'a>(ckpt: &'a Checkpoint, key: &str) -> Result<&'a str, CliError> {
    ckpt.metadata
        .get(key)
        .and_then(|v| v.as_str())
        .ok_or_else(|| CliError::Data(format!("checkpoint metadata lacks {key}")))
}

pub fn eval(
    checkpoint: &Path,
    dataset: &Path,
    format: DataFormat,
    ids: Option<&Path>,
    resamples: usize,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let ckpt = Checkpoint::load(checkpoint).map_err(data(checkpoint))?;
    let target = meta_str(&ckpt, "target")?.to_string();
    let policy: CutoffPolicy = meta_str(&ckpt, "policy")?
        .parse()
        .map_err(|e| CliError::Data(format!("checkpoint policy: {e}")))?;
    let norm: NormalizationStats = serde_json::from_value(ckpt.metadata["normalization"].clone())
        .map_err(|e| CliError::Data(format!("checkpoint normalization: {e}")))?;
    let seed = ckpt.metadata["seed"].as_u64().unwrap_or(0);

    let mut records = load_records(dataset, format)?;
    if let Some(path) = ids {
        let wanted = read_id_file(path)?;
        let by_id: BTreeMap<String, DatasetRecord> =
            records.into_iter().map(|r| (r.id.clone(), r)).collect();
        records = wanted
            .iter()
            .map(|id| {
                by_id
                    .get(id)
                    .cloned()
                    .ok_or_else(|| CliError::Data(format!("{}: unknown record {id}", path.display())))
            })
            .collect::<Result<_, _>>()?;
    }
    let samples = prepare_samples(&records, &target, &policy, &ckpt.params.config().rbf)
        .map_err(training_error)?;
    let m = metrics(&ckpt.params, &samples, &norm, resamples, seed)?;
    let mut w = sink(out)?;
    let text = serde_json::to_string_pretty(&metrics_json(&target, &m)).expect("json");
    writeln!(w, "{text}")
        .and_then(|_| w.flush())
        .map_err(|e| CliError::Data(e.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub policy: CutoffPolicy,
    pub val_mae: Option<f64>,
    pub test_mae: Option<f64>,
    pub mean_incoming_edges: Option<f64>,
    pub error: Option<String>,
}

pub const SWEEP_HEADER: [&str; 6] = ["policy", "param", "val_mae", "test_mae", "mean_incoming_edges", "error"];

/// One training run per policy with the shared seed. Errors are reported in
/// the target's reporting unit. A failing policy yields a row with an error
/// message and the sweep continues.
pub fn sweep(cfg: &ExperimentConfig, policies: &[CutoffPolicy]) -> Result<Vec<SweepRow>, CliError> {
    let records = load_records(&cfg.dataset, cfg.format)?;
    let scale = properties::lookup(&cfg.target).map_or(1.0, |p| p.report_scale);
    let mut rows = Vec::new();
    for &policy in policies {
        let run = policy
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))
            .and_then(|_| {
                let mut c = cfg.clone();
                c.policy = policy;
                run_experiment(&c, &records)
            });
        rows.push(match run {
            Ok(exp) => SweepRow {
                policy,
                val_mae: Some(exp.val.mae * scale),
                test_mae: exp.test.map(|t| t.mae * scale),
                mean_incoming_edges: Some(exp.mean_incoming_edges),
                error: match exp.outcome.stop {
                    StopReason::NonFinite { detail, .. } => Some(detail),
                    _ => None,
                },
            },
            Err(e) => SweepRow {
                policy,
                val_mae: None,
                test_mae: None,
                mean_incoming_edges: None,
                error: Some(e.to_string()),
            },
        });
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(w: W, rows: &[SweepRow]) -> Result<(), csv::Error> {
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SWEEP_HEADER)?;
    for r in rows {
        out.write_record([
            r.policy.name().to_string(),
            r.policy.param(),
            opt(r.val_mae),
            opt(r.test_mae),
            opt(r.mean_incoming_edges),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn sweep_cutoff(
    cfg: &ExperimentConfig,
    policies: &[CutoffPolicy],
    out: Option<&Path>,
) -> Result<(), CliError> {
    let rows = sweep(cfg, policies)?;
    write_sweep_csv(sink(out)?, &rows).map_err(|e| CliError::Data(e.to_string()))?;
    if rows.iter().all(|r| r.val_mae.is_none()) {
        return Err(CliError::Data("every policy in the sweep failed".into()));
    }
    Ok(())
}

/// `d_min, d_min + d_step, ...` up to `d_max` inclusive (within 1e-9).
pub fn distance_grid(d_min: f64, d_max: f64, d_step: f64) -> Result<Vec<f64>, CliError> {
    if !(d_step > 0.0 && d_min >= 0.0 && d_max >= d_min && d_max.is_finite()) {
        return Err(CliError::Usage(format!(
            "bad distance grid {d_min}..{d_max} step {d_step}"
        )));
    }
    if (d_min, d_max, d_step) == (0.0, 4.0, 0.05) {
        return Ok(default_grid());
    }
    let n = ((d_max - d_min) / d_step + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|i| ((d_min + i as f64 * d_step) * 1e9).round() / 1e9)
        .collect())
}

pub fn export_filters(
    checkpoint: &Path,
    species: &[String],
    d_min: f64,
    d_max: f64,
    d_step: f64,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let ckpt = Checkpoint::load(checkpoint).map_err(data(checkpoint))?;
    let zs: Vec<u32> = species
        .iter()
        .map(|s| atomic_number(s).ok_or_else(|| CliError::Usage(format!("unknown element symbol {s:?}"))))
        .collect::<Result<_, _>>()?;
    let grid = distance_grid(d_min, d_max, d_step)?;
    let table = model_export_filters(&ckpt.params, &zs, &grid).map_err(|e| CliError::Data(e.to_string()))?;
    table
        .write_csv(sink(out)?)
        .map_err(|e| CliError::Data(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(distance_grid(0.0, 4.0, 0.05).unwrap().len(), 81);
        assert_eq!(distance_grid(1.0, 2.0, 0.25).unwrap(), vec![1.0, 1.25, 1.5, 1.75, 2.0]);
        assert_eq!(distance_grid(0.0, 1.0, 0.1).unwrap()[3], 0.3);
        assert!(distance_grid(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage(String::new()).exit_code(), 1);
        assert_eq!(CliError::Data(String::new()).exit_code(), 2);
        assert_eq!(CliError::Numerical(String::new()).exit_code(), 3);
    }
}
