//! Files, configuration and the command-line front end for `plsmiss-core`.
//!
//! - [`csv_io`]: numeric CSV input with `NA` / empty cells as missing.
//! - [`model_io`]: plain-text model files.
//! - [`config`]: TOML run configurations.
//! - [`results`]: the results CSV schema.
//! - [`grid`]: the parallel simulation grid.
//! - [`summarize`] and [`svg`]: frequencies and plots.
//! - [`commands`]: fit, predict, select and impute on user data.

pub mod commands;
pub mod config;
pub mod csv_io;
pub mod error;
pub mod grid;
pub mod model_io;
pub mod results;
pub mod summarize;
pub mod svg;

pub use error::{CliError, Result};
