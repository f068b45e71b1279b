//! File formats, experiment runners and the command-line harness built on
//! `localscore-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod formats;
pub mod optdigits;
pub mod report;
pub mod stats;

pub use error::{CliError, Result};
