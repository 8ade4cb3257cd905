//! Command-line front end for the `evofuzz` engine: CSV ingestion,
//! synthetic stream generation, evaluation protocols and run artefacts.

pub mod baseline;
pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod gen;
pub mod metrics;
pub mod plots;
pub mod protocol;

pub use error::CliError;
