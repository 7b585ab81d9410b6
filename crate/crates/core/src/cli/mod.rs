//! The `edgenet` command line: dataset ingestion, graph statistics, training,
//! evaluation, cutoff sweeps and filter export.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::graphs::CutoffPolicy;

pub use commands::{
    apply_filters, distance_grid, load_records, run_experiment, sweep, write_sweep_csv, Experiment,
    IngestFilters, IngestReport, SweepRow, SWEEP_HEADER,
};
pub use config::{DataFormat, ExperimentConfig, Overrides, SplitArg};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "edgenet", version, about = "Message passing networks for molecules and crystals")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse, filter and split a dataset into a record cache.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "auto")]
        format: DataFormat,
        /// Output directory for dataset.jsonl, split files and report.json.
        #[arg(long)]
        out: PathBuf,
        /// Drop structures containing He, Ne, Ar, Kr or Xe.
        #[arg(long)]
        exclude_noble_gases: bool,
        /// Drop records whose formation energy exceeds this many eV/atom.
        #[arg(long)]
        max_formation_energy: Option<f64>,
        #[arg(long, value_enum, default_value = "fractions")]
        split: SplitArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Incoming-edge statistics per cutoff policy, as CSV.
    GraphStats {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value = "auto")]
        format: DataFormat,
        /// Repeatable: distance:R | knearest:K | voronoi
        #[arg(long = "policy", required = true)]
        policies: Vec<CutoffPolicy>,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one model and write checkpoint, log and effective config.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Evaluate a checkpoint and write metrics JSON.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value = "auto")]
        format: DataFormat,
        /// Restrict to the ids listed in this file.
        #[arg(long)]
        ids: Option<PathBuf>,
        #[arg(long, default_value_t = 100_000)]
        bootstrap_samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one model per cutoff policy and tabulate the errors.
    SweepCutoff {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate first-layer filters over species pairs and distances.
    ExportFilters {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Comma-separated element symbols.
        #[arg(long, value_delimiter = ',', default_value = "H,C,N,O,F")]
        species: Vec<String>,
        #[arg(long, default_value_t = 0.0)]
        d_min: f64,
        #[arg(long, default_value_t = 4.0)]
        d_max: f64,
        #[arg(long, default_value_t = 0.05)]
        d_step: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest {
            input,
            format,
            out,
            exclude_noble_gases,
            max_formation_energy,
            split,
            seed,
        } => {
            let filters = IngestFilters {
                exclude_noble_gases,
                max_formation_energy,
            };
            let report = commands::ingest(&input, format, &out, &filters, split.into(), seed)?;
            eprintln!(
                "kept {} of {} records ({} with noble gases, {} above the formation energy limit)",
                report.kept, report.input_records, report.excluded_noble_gas, report.excluded_formation_energy
            );
            Ok(())
        }
        Command::GraphStats {
            dataset,
            format,
            policies,
            out,
        } => commands::graph_stats(&dataset, format, &policies, out.as_deref()),
        Command::Train { config, overrides } => {
            let cfg = ExperimentConfig::resolve(config.as_deref(), &overrides)?;
            commands::train(&cfg)
        }
        Command::Eval {
            checkpoint,
            dataset,
            format,
            ids,
            bootstrap_samples,
            out,
        } => commands::eval(
            &checkpoint,
            &dataset,
            format,
            ids.as_deref(),
            bootstrap_samples,
            out.as_deref(),
        ),
        Command::SweepCutoff {
            config,
            mut overrides,
            out,
        } => {
            let sweep = std::mem::take(&mut overrides.policies);
            if sweep.is_empty() {
                return Err(CliError::Usage("sweep-cutoff needs at least one --policy".into()));
            }
            let cfg = ExperimentConfig::resolve(config.as_deref(), &overrides)?;
            commands::sweep_cutoff(&cfg, &sweep, out.as_deref())
        }
        Command::ExportFilters {
            checkpoint,
            species,
            d_min,
            d_max,
            d_step,
            out,
        } => commands::export_filters(&checkpoint, &species, d_min, d_max, d_step, out.as_deref()),
    }
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
