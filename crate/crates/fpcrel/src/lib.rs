//! File formats, caching, parallel drivers and the command-line tool built
//! on `fpcrel-core`.

pub mod analyze;
pub mod cache;
pub mod cli;
pub mod commands;
pub mod config;
pub mod curves;
pub mod error;
pub mod ingest;
pub mod parallel;
pub mod report;

pub use error::{Error, Result};
