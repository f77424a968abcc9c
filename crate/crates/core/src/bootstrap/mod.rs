//! The online multiplier bootstrap: `B` perturbed copies of the LSA iterate
//! that share the observation stream, confidence intervals built from their
//! spread, and the offline episode-resampling baseline.

mod ensemble;
mod interval;
mod offline;
mod weights;

pub use ensemble::{BootstrapEnsemble, OnlineBootstrap};
pub use interval::{
    pad_functional, quantile_ci, quantile_ci_from_values, quantile_interval, se_ci, se_ci_from_values,
    value_functional, CiMethod, ConfidenceInterval,
};
pub use offline::{lsa_estimator, offline_bootstrap, resample_indices};
pub use weights::{WeightKind, WeightSampler};

use thiserror::Error;

use crate::lsa::LsaError;
use crate::numerics::NumericsError;

/// Default number of bootstrap replicates.
pub const DEFAULT_REPLICATES: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BootstrapError {
    #[error("need at least 2 replicates, have {0}")]
    InsufficientReplicates(usize),
    #[error("confidence level {0} must lie in (0, 1)")]
    InvalidLevel(f64),
    #[error("replicate {replicate} diverged: {source}")]
    ReplicateDiverged { replicate: usize, source: LsaError },
    #[error("no episodes to resample")]
    EmptyEpisodes,
    #[error("invalid functional: {0}")]
    InvalidFunctional(String),
    #[error(transparent)]
    Lsa(#[from] LsaError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}
