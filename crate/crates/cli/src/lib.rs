//! Command-line plumbing for tabpat: dataset and model files, run
//! configuration, reports and the command implementations.

pub mod artifact;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod reports;
pub mod selftest;

pub use error::{CliError, CliResult};
