//! Host side of tremorlab: session files, run configuration, the
//! command-line workflows and the live session service.

pub mod clock;
pub mod commands;
pub mod config;
pub mod error;
pub mod serve;
pub mod store;
pub mod telemetry;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
