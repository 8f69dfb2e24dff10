//! Monte Carlo experiments: configuration, trial execution, metrics and CSV
//! output.

pub mod config;
pub mod metrics;
pub mod output;
pub mod runner;

pub use config::{AlgorithmKind, ConfigError, ExperimentConfig, SignalModel, SweepAxis};
pub use metrics::{classify_wanted, match_and_error, pooled_rmse};
pub use runner::{crlb_curve, run_experiment, Execution, ExperimentResult, PointResult};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Estimation(#[from] crate::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
