//! Command line front end for the linear-region attack: dataset loading,
//! the four subcommands and the versioned CSV report format.

pub mod commands;
pub mod dataset;
pub mod error;
pub mod report;

pub use error::{CliError, CliResult};
