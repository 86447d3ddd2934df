//! Command-line front end for racing-line optimization: configuration,
//! the `optimize`, `evaluate` and `compare` commands, and artifact writers.

pub mod commands;
pub mod config;
pub mod error;
pub mod offsets;
pub mod plot;

pub use config::{Overrides, RunConfig};
pub use error::CliError;
