//! File-driven workflow: JSON experiment configs, CSV solution grids,
//! binary checkpoints, PPM heatmaps, and the train/oracle/infer/compare/plot
//! commands behind the `qpinn` binary.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod grid_io;
pub mod ppm;

pub use commands::{cmd_compare, cmd_infer, cmd_oracle, cmd_plot, cmd_train};
pub use config::{ExperimentConfig, Kappa, Resolved};

use crate::oracle::OracleError;
use crate::pde::PdeError;
use crate::train::TrainError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("grid error: {0}")]
    Grid(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Pde(#[from] PdeError),
}

impl CliError {
    /// Process exit code: 2 for config problems, 3 for numerical aborts,
    /// 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use crate::exprgraph::GraphError;
        match self {
            CliError::Config(_) | CliError::Json(_) => 2,
            CliError::Train(TrainError::NonFinite { .. })
            | CliError::Train(TrainError::LineSearchFailed { .. })
            | CliError::Train(TrainError::Graph(GraphError::NonFinite { .. }))
            | CliError::Oracle(OracleError::StepUnderflow { .. }) => 3,
            _ => 1,
        }
    }
}
