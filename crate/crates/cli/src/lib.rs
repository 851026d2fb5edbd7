//! Experiment driver for the LMG quench-cycle simulator: configuration,
//! protocol runs, sweeps and CSV output.

pub mod commands;
pub mod config;
mod error;
pub mod experiment;
pub mod output;

pub use error::CliError;
