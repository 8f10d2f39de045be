//! Command-line layer over `windcond-core`: layered configuration and the
//! `fit`, `bootstrap`, `study`, `simulate` and `metrics` commands.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{cmd_bootstrap, cmd_fit, cmd_metrics, cmd_simulate, cmd_study, MetricsInput, Report};
pub use config::{Bins, ConfigLayer, RunConfig, SEED_ENV};
pub use error::{CliError, CliResult};
