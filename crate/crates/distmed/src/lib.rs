//! Files, configuration and command-line driver around `distmed-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod ingest;
pub mod pipeline;
pub mod report;

pub use distmed_core as core;
pub use error::{AppError, Result};
