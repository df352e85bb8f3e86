//! Config-driven experiment runner for the `pgopt` solvers: strict config
//! parsing, multi-trial execution with sample accounting, mean/std curve
//! aggregation, CSV output and SVG plots.

pub mod aggregate;
pub mod cli;
pub mod config;
pub mod error;
pub mod plot;
pub mod presets;
pub mod runner;

pub use config::{parse_config, serialize_config, ExperimentConfig};
pub use error::{ConfigError, HarnessError};
pub use runner::{run_experiment, write_outputs, ExperimentReport, RunOptions, TrialResult};
