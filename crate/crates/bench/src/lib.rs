//! Closed-loop experiments for the crossing planner: episode runner,
//! seeded batches, parameter sweeps and CSV/JSONL output.

pub mod batch;
pub mod config;
pub mod episode;
pub mod sweeps;

use crossing_core::{ConfigError, SimError};
use thiserror::Error;

pub use batch::{run_batch, AggregateMetrics};
pub use config::{BenchConfig, TtcConfig};
pub use episode::{run_episode, EpisodeMetrics, ExperimentSpec, Outcome, PolicyKind, StepRecord};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("csv error: {0}")]
    Csv(String),
}

impl From<std::io::Error> for BenchError {
    fn from(e: std::io::Error) -> Self {
        BenchError::Io(e.to_string())
    }
}

impl From<csv::Error> for BenchError {
    fn from(e: csv::Error) -> Self {
        BenchError::Csv(e.to_string())
    }
}
