//! Command-line front end for certds: dataset ingestion, learning runs,
//! evaluation, verification and field export.

pub mod commands;
pub mod csvio;
pub mod error;
pub mod manifest;
pub mod schema;

pub use error::CliError;
