//! MOEA/D as a configurable environment: problems, indicators, the
//! decomposition algorithm with DE operators and weight adaptation, and the
//! four-agent configuration environment built on top of it.

use thiserror::Error;

pub mod env;
pub mod indicators;
pub mod problems;
pub mod reference;
pub mod run;

pub use problems::{Problem, ProblemKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MoeadError {
    #[error("invalid configuration: {0}")]
    Config(&'static str),
    #[error("expected {expected} values, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("variable {index} = {value} lies outside its bounds")]
    OutOfBounds { index: usize, value: f64 },
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("empty point set")]
    EmptySet,
    #[error("hypervolume is only implemented for up to 3 objectives, got {0}")]
    UnsupportedObjectives(usize),
}
