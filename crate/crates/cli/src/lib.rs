//! File formats and experiment orchestration behind the `diter` binary.

pub mod commands;
pub mod error;
pub mod experiment;
pub mod io;

pub use error::{CliError, Result};
