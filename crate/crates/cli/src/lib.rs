//! Batch front end for the quench simulator: scenario configs, the
//! subcommands behind the `quench` binary, and their CSV and run-record
//! outputs.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
