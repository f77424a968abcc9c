//! Online multiplier-bootstrap confidence intervals for linear TD and GTD
//! policy evaluation.
//!
//! A stream of transitions from a tabular MDP is turned into observations
//! `(Ã, b̃)` of a linear system. The main iterate runs averaged linear
//! stochastic approximation on them, and `B` replicates run the same update
//! with i.i.d. random step multipliers. The spread of the replicate averages
//! around the main average gives confidence intervals for linear functionals
//! of the parameter, such as the value at a state.
//!
//! ```
//! use online_bootstrap::bootstrap::{OnlineBootstrap, WeightKind};
//! use online_bootstrap::env::{two_state_chain, TrajectorySampler};
//! use online_bootstrap::featurize::{FeatureMap, Featurizer, LsaMode};
//! use online_bootstrap::lsa::StepSchedule;
//!
//! let (mdp, policy) = two_state_chain(0.5);
//! let f = Featurizer::new(&mdp, FeatureMap::one_hot(2), LsaMode::Td, &policy, &policy).unwrap();
//! let mut ob = OnlineBootstrap::new(f.dim(), StepSchedule::default(), 50, WeightKind::UniformMv1, 7);
//! for tr in TrajectorySampler::new(&mdp, &policy, 7).take(20_000) {
//!     ob.step(&f.observe(&tr)).unwrap();
//! }
//! let (q, _se) = ob.intervals(&[1.0, 0.0], 0.95).unwrap();
//! assert!(q.lower < q.upper);
//! ```

pub mod bootstrap;
pub mod cli;
pub mod env;
pub mod featurize;
pub mod harness;
pub mod lsa;
pub mod numerics;
pub mod rng;
