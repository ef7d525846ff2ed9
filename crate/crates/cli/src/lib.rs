//! Configuration parsing and experiment dispatch for the `sparse-edge` binary.
//!
//! Exit codes: 0 when every contract holds, 2 when a contract fails, 1 on
//! any error.

pub mod config;
pub mod run;

pub use config::{parse_config, parse_with_overrides, Command, ConfigError, RunConfig, Source, KEYS};
pub use run::{run, RunError, RunOutcome};
