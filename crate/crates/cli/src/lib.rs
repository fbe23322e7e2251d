//! Reproducible experiments on random interval maps: exact transition and
//! invariant tables, wandering rates, Monte Carlo occupation times and the
//! acceptance suite.

pub mod commands;
pub mod config;
pub mod verify;

use skewlaw_core::chain::ChainError;
use skewlaw_core::maps::MapError;
use skewlaw_core::montecarlo::MonteCarloError;
use skewlaw_core::partition::PartitionError;

pub use commands::{run, write_artifact, Artifact};
pub use config::{Command, RunConfig, Suite};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("{0}")]
    Compute(String),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    /// 1 verification or computation failure, 2 usage, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verification(_) | CliError::Compute(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<MapError> for CliError {
    fn from(e: MapError) -> Self {
        match e {
            MapError::UnknownSystem(_) | MapError::Invalid(_) | MapError::Table(_) => CliError::Usage(e.to_string()),
            _ => CliError::Compute(e.to_string()),
        }
    }
}

impl From<PartitionError> for CliError {
    fn from(e: PartitionError) -> Self {
        match e {
            PartitionError::Custom | PartitionError::WrongSystem { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Compute(e.to_string()),
        }
    }
}

impl From<ChainError> for CliError {
    fn from(e: ChainError) -> Self {
        match e {
            ChainError::Custom | ChainError::Domain(_) => CliError::Usage(e.to_string()),
            ChainError::Partition(p) => p.into(),
            _ => CliError::Compute(e.to_string()),
        }
    }
}

impl From<MonteCarloError> for CliError {
    fn from(e: MonteCarloError) -> Self {
        match e {
            MonteCarloError::Config(_)
            | MonteCarloError::ExactLengthCap { .. }
            | MonteCarloError::FloatUnsupported(_) => CliError::Usage(e.to_string()),
            MonteCarloError::Map(m) => m.into(),
            MonteCarloError::Partition(p) => p.into(),
            _ => CliError::Compute(e.to_string()),
        }
    }
}
