//! Command-line front end: configuration files, single runs and sweeps.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{regimes_table, run_to_dir, sweep, Cell, CellResult, RunManifest, RunReport, SweepSpec};
pub use config::{parse_config, parse_config_str};
pub use error::{exit, CliError, Result};
