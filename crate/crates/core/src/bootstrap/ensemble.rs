use super::{quantile_ci_from_values, se_ci_from_values, BootstrapError, ConfidenceInterval, WeightKind, WeightSampler};
use crate::featurize::LsaObservation;
use crate::lsa::{LsaState, StepSchedule};
use crate::numerics::DenseVector;

/// `B` perturbed iterates `θ̂ᵇ` with their running averages. Replicate `b`
/// draws its weights from its own RNG stream, so the ensemble does not depend
/// on the order in which replicates are updated.
#[derive(Debug, Clone)]
pub struct BootstrapEnsemble {
    replicates: Vec<LsaState>,
    samplers: Vec<WeightSampler>,
}

impl BootstrapEnsemble {
    pub fn new(theta0: &DenseVector, n_replicates: usize, kind: WeightKind, seed: u64) -> Self {
        Self {
            replicates: vec![LsaState::new(theta0.clone()); n_replicates],
            samplers: (0..n_replicates as u64).map(|b| WeightSampler::from_seed(kind, seed, b)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.replicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replicates.is_empty()
    }

    /// Shared step count.
    pub fn t(&self) -> u64 {
        self.replicates.first().map_or(0, LsaState::t)
    }

    pub fn replicate(&self, b: usize) -> &LsaState {
        &self.replicates[b]
    }

    /// `θ̂ᵇ ← θ̂ᵇ + alpha·Wᵇ·(b̃ − Ã θ̂ᵇ)` for every replicate, all on the same
    /// observation.
    pub fn step(&mut self, obs: &LsaObservation, alpha: f64) -> Result<(), BootstrapError> {
        for (b, (rep, sampler)) in self.replicates.iter_mut().zip(&mut self.samplers).enumerate() {
            let w = sampler.sample();
            rep.step(obs, alpha * w).map_err(|source| BootstrapError::ReplicateDiverged { replicate: b, source })?;
        }
        Ok(())
    }

    /// `θ̄̂ᵇ` for every replicate.
    pub fn theta_bars(&self) -> Vec<DenseVector> {
        self.replicates.iter().map(LsaState::theta_bar).collect()
    }

    /// `cᵀθ̄̂ᵇ` for every replicate.
    pub fn functional_values(&self, c: &[f64]) -> Vec<f64> {
        self.replicates.iter().map(|r| r.functional_of_bar(c)).collect()
    }

    pub fn check_norms(&self, limit: f64) -> Result<(), BootstrapError> {
        for (b, rep) in self.replicates.iter().enumerate() {
            rep.check_norm(limit).map_err(|source| BootstrapError::ReplicateDiverged { replicate: b, source })?;
        }
        Ok(())
    }
}

/// The main averaged iterate together with its bootstrap ensemble, driven by
/// one step schedule.
#[derive(Debug, Clone)]
pub struct OnlineBootstrap {
    main: LsaState,
    ensemble: BootstrapEnsemble,
    schedule: StepSchedule,
}

impl OnlineBootstrap {
    /// Starts every iterate at zero.
    pub fn new(dim: usize, schedule: StepSchedule, n_replicates: usize, kind: WeightKind, seed: u64) -> Self {
        let theta0 = DenseVector::zeros(dim);
        Self {
            main: LsaState::new(theta0.clone()),
            ensemble: BootstrapEnsemble::new(&theta0, n_replicates, kind, seed),
            schedule,
        }
    }

    pub fn t(&self) -> u64 {
        self.main.t()
    }

    pub fn main(&self) -> &LsaState {
        &self.main
    }

    pub fn ensemble(&self) -> &BootstrapEnsemble {
        &self.ensemble
    }

    pub fn schedule(&self) -> &StepSchedule {
        &self.schedule
    }

    pub fn step(&mut self, obs: &LsaObservation) -> Result<(), BootstrapError> {
        let alpha = self.schedule.step_size(self.main.t() + 1);
        self.main.step(obs, alpha)?;
        self.ensemble.step(obs, alpha)
    }

    pub fn theta_bar(&self) -> DenseVector {
        self.main.theta_bar()
    }

    /// `cᵀθ̄`.
    pub fn estimate(&self, c: &[f64]) -> f64 {
        self.main.functional_of_bar(c)
    }

    /// Quantile and SE intervals for `cᵀθ`.
    pub fn intervals(&self, c: &[f64], level: f64) -> Result<(ConfidenceInterval, ConfidenceInterval), BootstrapError> {
        let center = self.estimate(c);
        let values = self.ensemble.functional_values(c);
        Ok((quantile_ci_from_values(center, &values, level)?, se_ci_from_values(center, &values, level)?))
    }

    pub fn check_norms(&self, limit: f64) -> Result<(), BootstrapError> {
        self.main.check_norm(limit)?;
        self.ensemble.check_norms(limit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bootstrap::{quantile_ci, se_ci};
    use crate::env::{frozen_lake, value_iteration, TrajectorySampler};
    use crate::featurize::{FeatureMap, Featurizer, LsaMode};

    fn lake_observations(n: usize) -> (Vec<LsaObservation>, usize) {
        let mdp = frozen_lake(4, 0.2, 0.95).unwrap();
        let pol = value_iteration(&mdp, 1e-10);
        let f = Featurizer::new(&mdp, FeatureMap::one_hot(16), LsaMode::Td, &pol, &pol).unwrap();
        let obs = TrajectorySampler::new(&mdp, &pol, 4).take(n).map(|t| f.observe(&t)).collect();
        (obs, f.dim())
    }

    #[test]
    fn unit_weights_reproduce_main_iterate_bitwise() {
        let (obs, dim) = lake_observations(1000);
        let mut ob = OnlineBootstrap::new(dim, StepSchedule::default(), 5, WeightKind::Unit, 1);
        for o in &obs {
            ob.step(o).unwrap();
        }
        for b in 0..5 {
            assert_eq!(ob.ensemble().replicate(b), ob.main());
        }
    }

    #[test]
    fn seeded_single_replicate_repeats() {
        let (obs, dim) = lake_observations(500);
        let run = |seed| {
            let mut ob = OnlineBootstrap::new(dim, StepSchedule::default(), 1, WeightKind::UniformMv1, seed);
            obs.iter().for_each(|o| ob.step(o).unwrap());
            ob.ensemble().theta_bars()
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
    }

    #[test]
    fn replicates_differ_under_random_weights() {
        let (obs, dim) = lake_observations(2000);
        let mut ob = OnlineBootstrap::new(dim, StepSchedule::default(), 20, WeightKind::UniformMv1, 2);
        obs.iter().for_each(|o| ob.step(o).unwrap());
        let c = {
            let mut c = vec![0.0; dim];
            c[0] = 1.0;
            c
        };
        let (q, s) = ob.intervals(&c, 0.95).unwrap();
        assert!(q.width() > 0.0 && s.width() > 0.0);
        assert!(q.lower <= ob.estimate(&c) && ob.estimate(&c) <= q.upper);
        let theta_bar = ob.theta_bar();
        assert_eq!(quantile_ci(&theta_bar, ob.ensemble(), 0.95, &c).unwrap(), q);
        assert_eq!(se_ci(&theta_bar, ob.ensemble(), 0.95, &c).unwrap(), s);
    }

    #[test]
    fn divergent_replicate_is_reported() {
        use crate::numerics::DenseMatrix;
        let obs = LsaObservation::dense(DenseMatrix::from_rows(&[vec![-1.0]]), DenseVector::new(vec![1.0]));
        let mut ens = BootstrapEnsemble::new(&DenseVector::zeros(1), 3, WeightKind::TwoPoint, 0);
        let err = (0..5000).find_map(|_| ens.step(&obs, 1.0).err());
        assert!(matches!(err, Some(BootstrapError::ReplicateDiverged { .. })));
    }
}
