//! Command-line interface.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::aggregate::read_curve_csv;
use crate::config::{parse_config, ExperimentConfig};
use crate::error::{ConfigError, HarnessError};
use crate::presets::{self, PRESETS};
use crate::runner::{run_experiment, standard_plots, write_outputs, RunOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "pgopt", version, about = "Projected gradient experiment runner")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment and write CSVs, a manifest and plots.
    Run {
        config: PathBuf,
        /// Override `experiment.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Override `experiment.trials`.
        #[arg(long)]
        trials: Option<usize>,
        /// Override `experiment.output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Concurrent trials (0: one per core).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// List or print built-in configurations.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
    /// Redraw plots from the curve files in an output directory.
    Plot { dir: PathBuf },
    /// Parse a configuration and print it with defaults filled in.
    Validate { config: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum PresetAction {
    List,
    Emit { name: String },
}

enum Failure {
    Config(String),
    Run(String),
}

fn load(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text).map_err(|e: ConfigError| Failure::Config(format!("{}: {e}", path.display())))
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Run(e.to_string());
    match cli.command {
        Command::Run {
            config,
            seed,
            trials,
            out: out_dir,
            jobs,
        } => {
            let mut cfg = load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(t) = trials {
                if t == 0 {
                    return Err(Failure::Config("--trials must be at least 1".into()));
                }
                cfg.trials = t;
            }
            if let Some(o) = out_dir {
                cfg.output_dir = o;
            }
            let report = run_experiment(&cfg, &RunOptions { jobs }).map_err(|e| Failure::Run(e.to_string()))?;
            write_outputs(&cfg, &report, &cfg.output_dir).map_err(|e| Failure::Run(e.to_string()))?;
            let failures = report.failures();
            writeln!(out, "wrote {}", cfg.output_dir.display()).map_err(io)?;
            if !failures.is_empty() {
                return Err(Failure::Run(format!(
                    "{} trial run(s) failed:\n{}",
                    failures.len(),
                    failures.join("\n")
                )));
            }
            Ok(())
        }
        Command::Presets { action } => match action {
            PresetAction::List => {
                for p in &PRESETS {
                    writeln!(out, "{:<18} {}", p.name, p.summary).map_err(io)?;
                }
                Ok(())
            }
            PresetAction::Emit { name } => match presets::find(&name) {
                Some(p) => out.write_all(p.text.as_bytes()).map_err(io),
                None => Err(Failure::Config(format!(
                    "unknown preset `{name}` (see `pgopt presets list`)"
                ))),
            },
        },
        Command::Plot { dir } => {
            let entries = std::fs::read_dir(&dir)
                .map_err(|e| Failure::Config(format!("cannot read {}: {e}", dir.display())))?;
            let mut files: Vec<(String, PathBuf)> = entries
                .flatten()
                .filter_map(|e| {
                    let name = e.file_name().into_string().ok()?;
                    let label = name.strip_prefix("curve_")?.strip_suffix(".csv")?.to_string();
                    Some((label, e.path()))
                })
                .collect();
            files.sort();
            if files.is_empty() {
                return Err(Failure::Run(format!("no curve files in {}", dir.display())));
            }
            let curves = files
                .iter()
                .map(|(label, path)| read_curve_csv(path, label))
                .collect::<Result<Vec<_>, HarnessError>>()
                .map_err(|e| Failure::Run(e.to_string()))?;
            for p in standard_plots(&curves, &dir).map_err(|e| Failure::Run(e.to_string()))? {
                writeln!(out, "wrote {}", p.svg.display()).map_err(io)?;
            }
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = load(&config)?;
            out.write_all(crate::config::serialize_config(&cfg).as_bytes()).map_err(io)
        }
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit
/// code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            if code == 0 {
                let _ = write!(out, "{e}");
                return EXIT_OK;
            }
            let _ = write!(err, "{e}");
            return EXIT_CONFIG;
        }
    };
    match execute(cli, out) {
        Ok(()) => EXIT_OK,
        Err(Failure::Config(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_CONFIG
        }
        Err(Failure::Run(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_FAILURE
        }
    }
}
