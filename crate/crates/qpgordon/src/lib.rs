//! File formats, configuration and subcommands for `qpgordon`.
//!
//! The numerics live in `qpgordon-core`. This crate parses the text
//! grammars, reads TOML experiment configs and writes CSV tables, JSON
//! reports and a run manifest.

pub mod commands;
pub mod config;
pub mod error;
pub mod grammar;
pub mod report;

pub use commands::{execute, Command, Outcome};
pub use config::ExperimentConfig;
pub use error::{exit, CliError, CliResult};
