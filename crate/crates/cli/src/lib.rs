//! Command-line front end: configuration, checkpoints, the subcommands and
//! their SVG charts.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod svg;

pub use error::{CliError, CliResult, ErrorKind};
