use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use distmed_core::simulation::{generate, run_seeds, SimDesign};
use distmed_core::Grid;

use crate::config::{parse_rho_grid, Mode, RunConfig};
use crate::error::{AppError, Result, Stage};
use crate::ingest::{ingest, Ingested, RawActivityTable, StoredDataset, SubjectTable, UnitKey};
use crate::pipeline::{run_pipeline, run_study_parallel};
use crate::report::{self, ReportDocument, SCHEMA_VERSION};

#[derive(Debug, Parser)]
#[command(name = "distmed", version, about = "Mediation analysis with a distribution-valued mediator")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build an analysis dataset from activity and subject CSV files.
    Ingest {
        #[arg(long)]
        activity: PathBuf,
        #[arg(long)]
        subjects: PathBuf,
        #[arg(long)]
        outcome: Option<String>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Output dataset JSON file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Point estimates without inference.
    Fit {
        /// Dataset JSON written by `ingest` or `simulate --save-dataset`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Point estimates with bootstrap tests and confidence bands.
    Test {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        boot: Option<usize>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        level: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Indirect effect over a grid of error correlations.
    Sensitivity {
        #[arg(long)]
        input: PathBuf,
        /// lo:hi:step, e.g. -0.3:0.3:0.1
        #[arg(long, allow_hyphen_values = true)]
        rho_grid: String,
        /// Also run the bootstrap with this many replicates.
        #[arg(long, requires = "seed")]
        boot: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulation study under one of the four designs.
    Simulate {
        #[arg(long)]
        sim: u8,
        #[arg(long)]
        runs: usize,
        #[arg(long)]
        boot: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 300)]
        n: usize,
        #[arg(long)]
        level: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Write the first run's dataset as dataset JSON.
        #[arg(long)]
        save_dataset: Option<PathBuf>,
    },
    /// Print a summary of a report.json file.
    Report {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum ModeArg {
    PerSubject,
    RepeatedMeasures,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn analyse(command: &str, data: &Ingested, config: &RunConfig, out: &Path) -> Result<()> {
    if data.dataset.grid().size() != config.grid_size {
        log::info!(
            "dataset grid has {} points; config grid_size {} applies only to ingestion",
            data.dataset.grid().size(),
            config.grid_size
        );
    }
    let output = run_pipeline(&data.dataset, config)?;
    let doc = ReportDocument {
        schema_version: SCHEMA_VERSION,
        command,
        outcome: &data.outcome_name,
        units: data.dataset.len(),
        clusters: data.dataset.clusters().len(),
        config,
        report: &output.report,
        sensitivity: output.sensitivity.as_ref(),
    };
    report::write_report_files(out, &doc)?;
    if let Some(inf) = &output.report.inference {
        println!(
            "indirect effect {:.6} (95% CI {:.6} to {:.6}), p = {:.4}",
            output.report.indirect_total, inf.indirect_total_ci[0], inf.indirect_total_ci[1], inf.p_global
        );
    } else {
        println!("indirect effect {:.6}", output.report.indirect_total);
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    let mut config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Ingest { activity, subjects, outcome, mode, out } => {
            if outcome.is_some() {
                config.outcome = outcome;
            }
            if let Some(m) = mode {
                config.mode = match m {
                    ModeArg::PerSubject => Mode::PerSubject,
                    ModeArg::RepeatedMeasures => Mode::RepeatedMeasures,
                };
            }
            let a = RawActivityTable::read(&activity)?;
            let s = SubjectTable::read(&subjects, config.covariates.as_deref())?;
            let ing = ingest(&a, &s, &config)?;
            report::write_json(&out, &StoredDataset::from_ingested(&ing))?;
            println!(
                "{} units from {} subjects ({} days dropped)",
                ing.units.len(),
                ing.dataset.clusters().len(),
                ing.dropped_days.len()
            );
            Ok(())
        }
        Command::Fit { input, out } => {
            config.bootstrap.replicates = 0;
            config.rho_grid.clear();
            analyse("fit", &StoredDataset::load(&input)?, &config, &out)
        }
        Command::Test { input, boot, seed, level, out } => {
            if let Some(b) = boot {
                config.bootstrap.replicates = b;
            }
            if config.bootstrap.replicates == 0 {
                return Err(AppError::usage("test needs at least one bootstrap replicate"));
            }
            if let Some(l) = level {
                config.level = l;
            }
            config.bootstrap.seed = Some(seed);
            config.rho_grid.clear();
            config.validate()?;
            analyse("test", &StoredDataset::load(&input)?, &config, &out)
        }
        Command::Sensitivity { input, rho_grid, boot, seed, out } => {
            config.rho_grid = parse_rho_grid(&rho_grid)?;
            config.bootstrap.replicates = boot.unwrap_or(0);
            config.bootstrap.seed = seed;
            analyse("sensitivity", &StoredDataset::load(&input)?, &config, &out)
        }
        Command::Simulate { sim, runs, boot, seed, n, level, out, save_dataset } => {
            if let Some(l) = level {
                config.level = l;
            }
            let grid = Grid::new(config.grid_size).stage("simulation")?;
            let design = SimDesign { n, grid, ..SimDesign::new(sim, seed) };
            design.validate().stage("simulation")?;
            if let Some(path) = save_dataset {
                let data = generate(&SimDesign { seed: run_seeds(seed, 0).0, ..design }).stage("simulation")?;
                let ing = Ingested {
                    units: (0..data.len()).map(|i| UnitKey { subject: format!("u{i}"), day: None }).collect(),
                    dataset: data,
                    outcome_name: String::from("y"),
                    mode: Mode::PerSubject,
                    dropped_days: Vec::new(),
                };
                report::write_json(&path, &StoredDataset::from_ingested(&ing))?;
            }
            let study = run_study_parallel(&design, &config.pipeline, runs, boot, config.level, seed)?;
            report::write_study_files(&out, &study)?;
            println!(
                "simulation {sim}: {} of {} runs, global rejection rate {:.3}",
                study.completed, study.runs, study.global_rate
            );
            Ok(())
        }
        Command::Report { input } => {
            let text = std::fs::read_to_string(&input).map_err(|e| AppError::io(&input, e))?;
            let doc: serde_json::Value = serde_json::from_str(&text).map_err(|e| AppError::format(&input, e))?;
            print!("{}", report::summarize(&doc).map_err(|e| AppError::format(&input, e))?);
            Ok(())
        }
    }
}
