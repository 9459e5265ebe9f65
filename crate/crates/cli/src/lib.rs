//! Configuration-driven front end: resolves experiment configurations,
//! runs them through `qpiston-core` and writes CSV or JSON results, each
//! carrying a manifest of the resolved parameters.

mod args;
pub mod config;
mod error;
mod execute;

pub use args::{run, Cli, Command, Flags};
pub use config::{parse_config, resolve, ConfigFile, Experiment, OutputFormat, RunConfig};
pub use error::CliError;
pub use execute::{execute, render, write_artifacts, Artifact};
