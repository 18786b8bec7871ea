//! Config-driven experiment runner for `fracmax`.

pub mod config;
pub mod run;

pub use config::{ConfigError, ConfigSource, Experiment, RunConfig};
pub use run::{run_config, RunError, RunOutcome};
