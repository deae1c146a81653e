//! Configuration, dispatch and result files for the `orthant` runner.

pub mod config;
pub mod run;

pub use config::{apply_overrides, parse_config, ExperimentConfig};
pub use run::{run, Command, RunManifest};
