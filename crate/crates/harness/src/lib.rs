//! Command-line front end: run configuration files, multi-seed training,
//! checkpoint evaluation, run comparison and environment benchmarks.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod envs;
pub mod error;
pub mod table;

pub use config::{EnvSpec, RunConfig};
pub use error::HarnessError;
