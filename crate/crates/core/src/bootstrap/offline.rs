use rand::Rng;
use rayon::prelude::*;

use super::BootstrapError;
use crate::env::Transition;
use crate::featurize::Featurizer;
use crate::lsa::{LsaError, LsaState, StepSchedule};
use crate::numerics::DenseVector;
use crate::rng::{derived_rng, DOMAIN_OFFLINE};

/// Episode indices drawn with replacement for offline replicate `b`.
pub fn resample_indices(n_episodes: usize, seed: u64, b: u64) -> Vec<usize> {
    let mut rng = derived_rng(seed, DOMAIN_OFFLINE, b);
    (0..n_episodes).map(|_| rng.random_range(0..n_episodes)).collect()
}

/// Classical bootstrap over whole episodes: each replicate draws
/// `episodes.len()` episodes with replacement, concatenates them and reruns
/// `estimator` from scratch.
pub fn offline_bootstrap<F>(
    episodes: &[Vec<Transition>],
    n_replicates: usize,
    estimator: F,
    seed: u64,
) -> Result<Vec<DenseVector>, BootstrapError>
where
    F: Fn(&[Transition]) -> Result<DenseVector, LsaError> + Sync,
{
    if episodes.is_empty() {
        return Err(BootstrapError::EmptyEpisodes);
    }
    (0..n_replicates as u64)
        .into_par_iter()
        .map(|b| {
            let data: Vec<Transition> = resample_indices(episodes.len(), seed, b)
                .into_iter()
                .flat_map(|i| episodes[i].iter().copied())
                .collect();
            estimator(&data).map_err(|source| BootstrapError::ReplicateDiverged { replicate: b as usize, source })
        })
        .collect()
}

/// The plain averaged LSA estimator over a transition sequence, from `θ₀ = 0`.
pub fn lsa_estimator(
    featurizer: &Featurizer,
    schedule: StepSchedule,
) -> impl Fn(&[Transition]) -> Result<DenseVector, LsaError> + Sync + '_ {
    move |data| {
        let mut state = LsaState::zeros(featurizer.dim());
        for tr in data {
            let alpha = schedule.step_size(state.t() + 1);
            state.step(&featurizer.observe(tr), alpha)?;
        }
        Ok(state.theta_bar())
    }
}
