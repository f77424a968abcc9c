//! Tabular MDPs, the Markov reward processes they induce under a policy, and
//! trajectory sampling with episode concatenation.

mod analysis;
mod builders;
mod planning;
mod sampler;

pub use analysis::{
    expected_lsa_system, induce_mrp, observation_distribution, stationary_distribution, true_value, Restart,
    DEFAULT_DAMPING,
};
pub use builders::{
    build_gridworld, build_random_mdp, frozen_lake, gridworld_from_map, linear_value_rewards, two_state_chain,
    GridAction, RandomMdp, FROZEN_LAKE_4X4, FROZEN_LAKE_8X8,
};
pub use planning::{epsilon_greedy, value_iteration};
pub use sampler::{collect_episodes, TrajectorySampler};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{DenseMatrix, DenseVector, NumericsError};

pub(crate) const PROB_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid gridworld layout: {0}")]
    InvalidLayout(String),
    #[error("power iteration did not converge after {0} iterations")]
    NonConvergence(usize),
    #[error("target policy puts mass on action {action} in state {state} where the behavior policy does not")]
    ZeroBehaviorProbability { state: usize, action: usize },
    #[error("TD mode is on-policy; target and behavior policies differ")]
    OffPolicyTd,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Finite MDP with transition and reward tensors indexed `[s][a][s']`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    transition: Vec<f64>,
    reward: Vec<f64>,
    gamma: f64,
    terminal: Vec<bool>,
    start_state: usize,
    r_max: f64,
}

impl TabularMdp {
    /// Validates and builds an MDP. `transition` and `reward` are flat
    /// `[s][a][s']` tensors.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        gamma: f64,
        terminal: Vec<bool>,
        start_state: usize,
    ) -> Result<Self, EnvError> {
        let len = n_states * n_actions * n_states;
        if n_states == 0 || n_actions == 0 {
            return Err(EnvError::InvalidMdp("empty state or action space".into()));
        }
        if transition.len() != len || reward.len() != len || terminal.len() != n_states {
            return Err(EnvError::DimensionMismatch(format!(
                "expected tensors of length {len} and {n_states} terminal flags"
            )));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(EnvError::InvalidMdp(format!("discount {gamma} outside (0, 1)")));
        }
        if start_state >= n_states {
            return Err(EnvError::InvalidMdp(format!("start state {start_state} out of range")));
        }
        if terminal[start_state] {
            return Err(EnvError::InvalidMdp("start state is terminal".into()));
        }
        if let Some(x) = reward.iter().find(|x| !x.is_finite()) {
            return Err(EnvError::InvalidMdp(format!("non-finite reward {x}")));
        }
        for s in 0..n_states {
            for a in 0..n_actions {
                let row = &transition[(s * n_actions + a) * n_states..][..n_states];
                if row.iter().any(|p| p.is_nan() || *p < 0.0) {
                    return Err(EnvError::InvalidMdp(format!("negative or NaN probability in P[{s}][{a}]")));
                }
                let total: f64 = row.iter().sum();
                if (total - 1.0).abs() > PROB_TOL {
                    return Err(EnvError::InvalidMdp(format!("P[{s}][{a}] sums to {total}")));
                }
                if terminal[s] {
                    let rew = &reward[(s * n_actions + a) * n_states..][..n_states];
                    if (row[s] - 1.0).abs() > PROB_TOL || rew.iter().any(|r| *r != 0.0) {
                        return Err(EnvError::InvalidMdp(format!(
                            "terminal state {s} must self-loop with zero reward"
                        )));
                    }
                }
            }
        }
        let r_max = reward.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
        Ok(Self { n_states, n_actions, transition, reward, gamma, terminal, start_state, r_max })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn start_state(&self) -> usize {
        self.start_state
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn terminal_mask(&self) -> &[bool] {
        &self.terminal
    }

    pub fn has_terminal_states(&self) -> bool {
        self.terminal.iter().any(|t| *t)
    }

    /// Next-state distribution `P[s][a][·]`.
    pub fn next_state_probs(&self, s: usize, a: usize) -> &[f64] {
        &self.transition[(s * self.n_actions + a) * self.n_states..][..self.n_states]
    }

    pub fn rewards(&self, s: usize, a: usize) -> &[f64] {
        &self.reward[(s * self.n_actions + a) * self.n_states..][..self.n_states]
    }

    pub fn prob(&self, s: usize, a: usize, s_next: usize) -> f64 {
        self.next_state_probs(s, a)[s_next]
    }

    pub fn reward(&self, s: usize, a: usize, s_next: usize) -> f64 {
        self.rewards(s, a)[s_next]
    }

    /// Same dynamics with a different discount.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self, EnvError> {
        let mut m = self.clone();
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(EnvError::InvalidMdp(format!("discount {gamma} outside (0, 1)")));
        }
        m.gamma = gamma;
        Ok(m)
    }

    pub fn to_file(&self) -> MdpFile {
        let nest = |flat: &[f64]| -> Vec<Vec<Vec<f64>>> {
            (0..self.n_states)
                .map(|s| {
                    (0..self.n_actions)
                        .map(|a| flat[(s * self.n_actions + a) * self.n_states..][..self.n_states].to_vec())
                        .collect()
                })
                .collect()
        };
        MdpFile {
            transition: nest(&self.transition),
            reward: nest(&self.reward),
            gamma: self.gamma,
            terminal: self.terminal.clone(),
            start_state: self.start_state,
        }
    }
}

/// JSON layout for an externally supplied MDP: nested `[s][a][s']` tensors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MdpFile {
    pub transition: Vec<Vec<Vec<f64>>>,
    pub reward: Vec<Vec<Vec<f64>>>,
    pub gamma: f64,
    #[serde(default)]
    pub terminal: Vec<bool>,
    #[serde(default)]
    pub start_state: usize,
}

impl TryFrom<MdpFile> for TabularMdp {
    type Error = EnvError;

    fn try_from(f: MdpFile) -> Result<Self, EnvError> {
        let n_states = f.transition.len();
        let n_actions = f.transition.first().map_or(0, Vec::len);
        let flatten = |t: Vec<Vec<Vec<f64>>>, what: &str| -> Result<Vec<f64>, EnvError> {
            if t.len() != n_states
                || t.iter().any(|r| r.len() != n_actions || r.iter().any(|x| x.len() != n_states))
            {
                return Err(EnvError::DimensionMismatch(format!("{what} tensor is not {n_states}x{n_actions}x{n_states}")));
            }
            Ok(t.into_iter().flatten().flatten().collect())
        };
        let transition = flatten(f.transition, "transition")?;
        let reward = flatten(f.reward, "reward")?;
        let terminal = if f.terminal.is_empty() { vec![false; n_states] } else { f.terminal };
        TabularMdp::new(n_states, n_actions, transition, reward, f.gamma, terminal, f.start_state)
    }
}

/// Stationary stochastic policy `π[s][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self, EnvError> {
        if probs.len() != n_states * n_actions {
            return Err(EnvError::DimensionMismatch(format!(
                "policy table needs {} entries, got {}",
                n_states * n_actions,
                probs.len()
            )));
        }
        for (s, row) in probs.chunks(n_actions).enumerate() {
            if row.iter().any(|p| p.is_nan() || *p < 0.0) {
                return Err(EnvError::InvalidPolicy(format!("negative or NaN probability in state {s}")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > PROB_TOL {
                return Err(EnvError::InvalidPolicy(format!("row {s} sums to {total}")));
            }
        }
        Ok(Self { n_states, n_actions, probs })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, EnvError> {
        let n_actions = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_actions) {
            return Err(EnvError::DimensionMismatch("ragged policy rows".into()));
        }
        Self::new(rows.len(), n_actions, rows.concat())
    }

    /// Deterministic policy choosing `actions[s]` in state `s`.
    pub fn deterministic(actions: &[usize], n_actions: usize) -> Result<Self, EnvError> {
        let mut probs = vec![0.0; actions.len() * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(EnvError::InvalidPolicy(format!("action {a} out of range in state {s}")));
            }
            probs[s * n_actions + a] = 1.0;
        }
        Ok(Self { n_states: actions.len(), n_actions, probs })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self { n_states, n_actions, probs: vec![1.0 / n_actions as f64; n_states * n_actions] }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..][..self.n_actions]
    }

    pub(crate) fn check_matches(&self, mdp: &TabularMdp) -> Result<(), EnvError> {
        if self.n_states != mdp.n_states() || self.n_actions != mdp.n_actions() {
            return Err(EnvError::DimensionMismatch(format!(
                "policy is {}x{}, MDP has {} states and {} actions",
                self.n_states,
                self.n_actions,
                mdp.n_states(),
                mdp.n_actions()
            )));
        }
        Ok(())
    }
}

/// Markov reward process induced by fixing a policy in an MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct Mrp {
    pub kernel: DenseMatrix,
    pub expected_reward: DenseVector,
    pub gamma: f64,
    pub terminal: Vec<bool>,
    pub start_state: usize,
}

/// One observed step `(s, a, r, s')` of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub s: usize,
    pub a: usize,
    pub r: f64,
    pub s_next: usize,
    pub terminal_next: bool,
}
