//! Experiment runner for the `lowdev` binary.

pub mod config;
pub mod error;
pub mod run;

pub use config::ExperimentConfig;
pub use error::CliError;
pub use run::{resolve_out_dir, run_experiment, RunOptions};
