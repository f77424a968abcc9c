//! Experiment orchestration: single evaluation runs with interval traces,
//! Monte-Carlo coverage studies, step-size sweeps, coverage-error
//! regression, the offline-bootstrap comparison and CSV output.

mod config;
mod output;
mod run;

pub use config::{Budget, EnvSpec, EvalSpec, ExperimentConfig, FeatureSpec, Task};
pub use output::{
    format_real, read_coverage_csv, write_coverage_csv, write_regression_csv, write_sweep_csv, write_trace_csv,
    RegressionRow, COVERAGE_HEADER, REGRESSION_HEADER, SWEEP_HEADER, TRACE_HEADER,
};
pub use run::{
    aggregate_coverage, coverage_error_floor, coverage_error_regression, regress_coverage, run_coverage,
    run_offline_comparison, run_policy_eval, run_sensitivity, CoverageRecord, Experiment, OfflineComparison, SweepRow,
    Trace, TraceRow,
};

use thiserror::Error;

use crate::bootstrap::BootstrapError;
use crate::env::EnvError;
use crate::featurize::FeatureError;
use crate::lsa::LsaError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("run diverged: {0}")]
    Diverged(String),
    #[error("need at least 3 checkpoints for a regression, have {0}")]
    InsufficientPoints(usize),
    #[error("I/O: {0}")]
    Io(String),
}

impl HarnessError {
    /// Process exit status for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Diverged(_) => 2,
            _ => 1,
        }
    }
}

impl From<BootstrapError> for HarnessError {
    fn from(e: BootstrapError) -> Self {
        match e {
            BootstrapError::ReplicateDiverged { .. } | BootstrapError::Lsa(_) => HarnessError::Diverged(e.to_string()),
            other => HarnessError::Config(other.to_string()),
        }
    }
}

impl From<LsaError> for HarnessError {
    fn from(e: LsaError) -> Self {
        match e {
            LsaError::NonFinite { .. } | LsaError::NormGuard { .. } => HarnessError::Diverged(e.to_string()),
            other => HarnessError::Config(other.to_string()),
        }
    }
}

impl From<EnvError> for HarnessError {
    fn from(e: EnvError) -> Self {
        HarnessError::Config(e.to_string())
    }
}

impl From<FeatureError> for HarnessError {
    fn from(e: FeatureError) -> Self {
        HarnessError::Config(e.to_string())
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}
