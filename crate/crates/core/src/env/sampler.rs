use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Policy, TabularMdp, Transition};
use crate::rng::derived_rng;

/// Streams transitions from an MDP under a behavior policy, concatenating
/// episodes: after a transition into a terminal state the next transition
/// starts from the start state, and no restart transition is emitted.
#[derive(Debug, Clone)]
pub struct TrajectorySampler<'a> {
    mdp: &'a TabularMdp,
    behavior: &'a Policy,
    rng: ChaCha8Rng,
    current: usize,
    steps: u64,
    episodes: u64,
}

impl<'a> TrajectorySampler<'a> {
    pub fn new(mdp: &'a TabularMdp, behavior: &'a Policy, seed: u64) -> Self {
        Self::with_rng(mdp, behavior, derived_rng(seed, crate::rng::DOMAIN_TRAJECTORY, 0))
    }

    pub fn with_rng(mdp: &'a TabularMdp, behavior: &'a Policy, rng: ChaCha8Rng) -> Self {
        behavior.check_matches(mdp).expect("behavior policy must match the MDP");
        Self { mdp, behavior, rng, current: mdp.start_state(), steps: 0, episodes: 0 }
    }

    pub fn current_state(&self) -> usize {
        self.current
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Number of transitions into a terminal state so far.
    pub fn episodes_completed(&self) -> u64 {
        self.episodes
    }

    pub fn next_transition(&mut self) -> Transition {
        let s = self.current;
        let a = sample_index(&mut self.rng, self.behavior.row(s));
        let s_next = sample_index(&mut self.rng, self.mdp.next_state_probs(s, a));
        let r = self.mdp.reward(s, a, s_next);
        let terminal_next = self.mdp.is_terminal(s_next);
        self.steps += 1;
        if terminal_next {
            self.episodes += 1;
            self.current = self.mdp.start_state();
        } else {
            self.current = s_next;
        }
        Transition { s, a, r, s_next, terminal_next }
    }
}

impl Iterator for TrajectorySampler<'_> {
    type Item = Transition;

    fn next(&mut self) -> Option<Transition> {
        Some(self.next_transition())
    }
}

/// Draws `n_episodes` complete episodes. The MDP must have reachable
/// terminal states or this does not return.
pub fn collect_episodes(sampler: &mut TrajectorySampler<'_>, n_episodes: usize) -> Vec<Vec<Transition>> {
    let mut episodes = Vec::with_capacity(n_episodes);
    let mut current = Vec::new();
    while episodes.len() < n_episodes {
        let tr = sampler.next_transition();
        current.push(tr);
        if tr.terminal_next {
            episodes.push(std::mem::take(&mut current));
        }
    }
    episodes
}

fn sample_index(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}
