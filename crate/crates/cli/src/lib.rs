//! Configuration-driven front end for the staggered-grid solvers.

pub mod commands;
pub mod config;
pub mod error;
pub mod expr;

pub use commands::{cmd_dump_operators, cmd_rows, cmd_run, cmd_verify, Report};
pub use config::RunConfig;
pub use error::{exit, CliError};
