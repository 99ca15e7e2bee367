//! Configuration files, snapshot files and run directories.

pub mod config;
pub mod rundir;
pub mod snapshot;

pub use config::{parse_config, RunConfig};
