//! Command-line front end for `mspec-core`: run configuration, model cards,
//! CSV tables, artifact manifests and the `mspec` subcommands.

pub mod card;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod manifest;
pub mod parallel;

pub use card::ModelCard;
pub use config::RunConfig;
pub use error::{CliError, CliResult};
