//! Library side of the `metalseg` command: configuration, subcommand
//! implementations and error reporting.

pub mod commands;
pub mod config;
pub mod error;

pub use config::Config;
pub use error::{CliError, CliResult};
