//! Built-in environments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{induce_mrp, EnvError, Policy, TabularMdp};
use crate::featurize::FeatureMap;
use crate::numerics::DenseVector;

/// Gym FrozenLake 4×4 layout (`S` start, `F` frozen, `H` hole, `G` goal).
pub const FROZEN_LAKE_4X4: [&str; 4] = ["SFFF", "FHFH", "FFFH", "HFFG"];

/// Gym FrozenLake 8×8 layout.
pub const FROZEN_LAKE_8X8: [&str; 8] = [
    "SFFFFFFF", "FFFFFFFF", "FFFHFFFF", "FFFFFHFF", "FFFHFFFF", "FHHFFFHF", "FHFFHFHF", "FFFHFFFG",
];

/// Gridworld actions, numbered as in Gym's FrozenLake.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridAction {
    Left = 0,
    Down = 1,
    Right = 2,
    Up = 3,
}

impl GridAction {
    pub const ALL: [GridAction; 4] = [GridAction::Left, GridAction::Down, GridAction::Right, GridAction::Up];

    fn perpendicular(self) -> [GridAction; 2] {
        match self {
            GridAction::Left | GridAction::Right => [GridAction::Up, GridAction::Down],
            GridAction::Up | GridAction::Down => [GridAction::Left, GridAction::Right],
        }
    }

    fn apply(self, row: usize, col: usize, width: usize, height: usize) -> (usize, usize) {
        match self {
            GridAction::Left => (row, col.saturating_sub(1)),
            GridAction::Right => (row, (col + 1).min(width - 1)),
            GridAction::Up => (row.saturating_sub(1), col),
            GridAction::Down => ((row + 1).min(height - 1), col),
        }
    }
}

/// Gridworld with start at state 0 (top-left), states numbered row-major.
///
/// The intended move happens with probability `1 - slip` and each
/// perpendicular move with `slip / 2`; moves off the grid stay in place.
/// Holes and the goal are absorbing, and only transitions into the goal pay 1.
pub fn build_gridworld(
    width: usize,
    height: usize,
    holes: &[usize],
    goal: usize,
    slip: f64,
    gamma: f64,
) -> Result<TabularMdp, EnvError> {
    grid_mdp(width, height, 0, holes, goal, slip, gamma)
}

/// Builds a gridworld from a FrozenLake-style character map.
pub fn gridworld_from_map(map: &[&str], slip: f64, gamma: f64) -> Result<TabularMdp, EnvError> {
    let height = map.len();
    let width = map.first().map_or(0, |r| r.len());
    let (mut start, mut goal) = (None, None);
    let mut holes = Vec::new();
    for (row, line) in map.iter().enumerate() {
        if line.len() != width {
            return Err(EnvError::InvalidLayout(format!("row {row} has length {}, expected {width}", line.len())));
        }
        for (col, ch) in line.chars().enumerate() {
            let s = row * width + col;
            match ch {
                'S' => start = Some(s),
                'G' => goal = Some(s),
                'H' => holes.push(s),
                'F' => {}
                other => return Err(EnvError::InvalidLayout(format!("unknown tile {other:?}"))),
            }
        }
    }
    let start = start.ok_or_else(|| EnvError::InvalidLayout("map has no start tile".into()))?;
    let goal = goal.ok_or_else(|| EnvError::InvalidLayout("map has no goal tile".into()))?;
    grid_mdp(width, height, start, &holes, goal, slip, gamma)
}

/// FrozenLake with the standard 4×4 or 8×8 layout.
pub fn frozen_lake(size: usize, slip: f64, gamma: f64) -> Result<TabularMdp, EnvError> {
    match size {
        4 => gridworld_from_map(&FROZEN_LAKE_4X4, slip, gamma),
        8 => gridworld_from_map(&FROZEN_LAKE_8X8, slip, gamma),
        other => Err(EnvError::InvalidLayout(format!("no built-in FrozenLake map of size {other}"))),
    }
}

fn grid_mdp(
    width: usize,
    height: usize,
    start: usize,
    holes: &[usize],
    goal: usize,
    slip: f64,
    gamma: f64,
) -> Result<TabularMdp, EnvError> {
    let n = width * height;
    if n == 0 {
        return Err(EnvError::InvalidLayout("empty grid".into()));
    }
    if !(0.0..1.0).contains(&slip) {
        return Err(EnvError::InvalidLayout(format!("slip {slip} outside [0, 1)")));
    }
    if goal >= n || holes.iter().any(|h| *h >= n) {
        return Err(EnvError::InvalidLayout("goal or hole index outside the grid".into()));
    }
    if holes.contains(&goal) {
        return Err(EnvError::InvalidLayout("goal is a hole".into()));
    }
    if start == goal || holes.contains(&start) {
        return Err(EnvError::InvalidLayout("start state is terminal".into()));
    }

    let mut terminal = vec![false; n];
    terminal[goal] = true;
    for h in holes {
        terminal[*h] = true;
    }
    let na = GridAction::ALL.len();
    let mut transition = vec![0.0; n * na * n];
    let mut reward = vec![0.0; n * na * n];
    for s in 0..n {
        let (row, col) = (s / width, s % width);
        for action in GridAction::ALL {
            let base = (s * na + action as usize) * n;
            if terminal[s] {
                transition[base + s] = 1.0;
                continue;
            }
            let [p1, p2] = action.perpendicular();
            for (dir, p) in [(action, 1.0 - slip), (p1, slip / 2.0), (p2, slip / 2.0)] {
                if p == 0.0 {
                    continue;
                }
                let (r, c) = dir.apply(row, col, width, height);
                transition[base + r * width + c] += p;
            }
            reward[base + goal] = 1.0;
        }
    }
    TabularMdp::new(n, na, transition, reward, gamma, terminal, start)
}

/// Two-state deterministic chain `0 → 1 → 0 → …` paying 1 on leaving state 0.
/// Its value is `(1, γ) / (1 - γ²)`.
pub fn two_state_chain(gamma: f64) -> (TabularMdp, Policy) {
    let transition = vec![0.0, 1.0, 1.0, 0.0];
    let reward = vec![0.0, 1.0, 0.0, 0.0];
    let mdp = TabularMdp::new(2, 1, transition, reward, gamma, vec![false; 2], 0).expect("valid chain");
    let policy = Policy::uniform(2, 1);
    (mdp, policy)
}

/// Output of [`build_random_mdp`].
#[derive(Debug, Clone)]
pub struct RandomMdp {
    pub mdp: TabularMdp,
    pub features: FeatureMap,
    pub theta_true: DenseVector,
    pub target: Policy,
}

/// Random MDP whose target-policy value is exactly `Φ θ_true`.
///
/// Transition rows and target-policy rows are symmetric Dirichlet(1),
/// features are uniform(0, 1) then column-standardized and `θ_true` is
/// uniform(−1, 1). Rewards are state-dependent only: `R(s, a, s') = r(s)`
/// with `r = (I − γP^π)Φθ_true`.
pub fn build_random_mdp(
    n_states: usize,
    n_actions: usize,
    d: usize,
    gamma: f64,
    seed: u64,
) -> Result<RandomMdp, EnvError> {
    if d == 0 || d >= n_states {
        return Err(EnvError::InvalidMdp(format!("feature dimension {d} must lie in [1, {n_states})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transition = Vec::with_capacity(n_states * n_actions * n_states);
    for _ in 0..n_states * n_actions {
        transition.extend(dirichlet_ones(&mut rng, n_states));
    }
    let mut policy_probs = Vec::with_capacity(n_states * n_actions);
    for _ in 0..n_states {
        policy_probs.extend(dirichlet_ones(&mut rng, n_actions));
    }
    let target = Policy::new(n_states, n_actions, policy_probs)?;
    let feature_seed = rng.random::<u64>();
    let theta_true = DenseVector::new((0..d).map(|_| rng.random_range(-1.0..1.0)).collect());
    let features = FeatureMap::random(n_states, d, feature_seed)
        .map_err(|e| EnvError::InvalidMdp(format!("feature construction failed: {e}")))?;

    let zero_reward = vec![0.0; transition.len()];
    let shell = TabularMdp::new(n_states, n_actions, transition, zero_reward, gamma, vec![false; n_states], 0)?;
    let mdp = linear_value_rewards(&shell, &target, &features, &theta_true)?;
    Ok(RandomMdp { mdp, features, theta_true, target })
}

/// Replaces the rewards of `mdp` with the state-dependent rewards
/// `r = (I − γP^π)Φθ` that make `Φθ` the exact value of `policy`.
pub fn linear_value_rewards(
    mdp: &TabularMdp,
    policy: &Policy,
    features: &FeatureMap,
    theta: &DenseVector,
) -> Result<TabularMdp, EnvError> {
    if features.dim() != theta.dim() || features.n_states() != mdp.n_states() {
        return Err(EnvError::DimensionMismatch("features and parameter do not match the MDP".into()));
    }
    if mdp.has_terminal_states() {
        return Err(EnvError::InvalidMdp("linear-value rewards need an MDP without terminal states".into()));
    }
    let mrp = induce_mrp(mdp, policy)?;
    let value = features.table().mul_vec(theta);
    let state_reward = value.sub(&mrp.kernel.mul_vec(&value).scaled(mdp.gamma()));
    let (n, na) = (mdp.n_states(), mdp.n_actions());
    let mut reward = vec![0.0; n * na * n];
    for s in 0..n {
        reward[s * na * n..(s + 1) * na * n].iter_mut().for_each(|r| *r = state_reward[s]);
    }
    let transition = (0..n).flat_map(|s| (0..na).flat_map(move |a| mdp.next_state_probs(s, a).to_vec())).collect();
    TabularMdp::new(n, na, transition, reward, mdp.gamma(), vec![false; n], mdp.start_state())
}

/// Symmetric Dirichlet(1) draw via normalized exponentials.
fn dirichlet_ones(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(rand_distr::Exp1)).collect();
    let total: f64 = raw.iter().sum();
    let mut out: Vec<f64> = raw.into_iter().map(|x| x / total).collect();
    // Put the rounding residue on the largest entry so rows sum to 1 tightly.
    let resid = 1.0 - out.iter().sum::<f64>();
    let imax = out.iter().enumerate().fold(0, |m, (i, x)| if *x > out[m] { i } else { m });
    out[imax] += resid;
    out
}
