//! Command-line driver: configuration, subcommands and the validation suite.

pub mod commands;
pub mod config;
pub mod validate;

pub use commands::run;
pub use config::{Cli, Command, GrowthRateArg, RunConfig};
