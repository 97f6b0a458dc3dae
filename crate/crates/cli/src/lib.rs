//! Command implementations behind the `dtofkit` binary.

pub mod commands;
pub mod error;
pub mod manifest;

pub use commands::{run, Command};
pub use error::{CliError, CliResult};
pub use manifest::RunManifest;
