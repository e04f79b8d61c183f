//! Configuration, experiment orchestration and self-checks.

pub mod config;
pub mod experiment;
pub mod selfcheck;

pub use config::{parse_config, ClassConfig, ConfigError, ExperimentConfig, Mode};
pub use experiment::{load_config, run_experiment, RunReport};
pub use selfcheck::{run_selfcheck, CheckOutcome};
