//! Library surface of the command-line driver, split out so the
//! integration tests can exercise parsing and rendering without
//! spawning the binary.

pub mod commands;
pub mod config;
pub mod field_file;
pub mod report;

pub use commands::CliError;
pub use config::{MisfitMode, RunConfig, SolverParams};
pub use field_file::LoadedField;
