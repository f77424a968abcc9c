use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::bootstrap::{WeightKind, DEFAULT_REPLICATES};

/// Environment to evaluate on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvSpec {
    Gridworld {
        width: usize,
        height: usize,
        #[serde(default)]
        holes: Vec<usize>,
        goal: usize,
        #[serde(default)]
        slip: f64,
    },
    FrozenLake {
        size: usize,
        #[serde(default)]
        slip: f64,
    },
    RandomMdp {
        n_states: usize,
        n_actions: usize,
        dim: usize,
        #[serde(default)]
        seed: u64,
    },
    TwoState,
    /// JSON file in the [`crate::env::MdpFile`] layout.
    File {
        path: PathBuf,
    },
}

impl EnvSpec {
    pub fn default_gamma(&self) -> Option<f64> {
        match self {
            EnvSpec::Gridworld { .. } | EnvSpec::FrozenLake { .. } => Some(0.95),
            EnvSpec::RandomMdp { .. } => Some(0.9),
            EnvSpec::TwoState => Some(0.5),
            EnvSpec::File { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    #[default]
    TdOnpolicy,
    GtdNeu,
    GtdMspbe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeatureSpec {
    /// The random MDP's own features, one-hot everywhere else.
    #[default]
    Auto,
    OneHot,
    Random {
        dim: usize,
        #[serde(default)]
        seed: u64,
    },
    /// CSV table with header `f0,...,f{d-1}` and one row per state.
    Csv {
        path: PathBuf,
    },
}

/// Which linear functional of `θ` the intervals are built for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EvalSpec {
    /// Value at the start state.
    #[default]
    Start,
    State(usize),
    /// Value averaged over a reference distribution over states.
    Nu(Vec<f64>),
}

fn default_alpha0() -> f64 {
    0.5
}
fn default_eta() -> f64 {
    0.75
}
fn default_b() -> usize {
    DEFAULT_REPLICATES
}
fn default_level() -> f64 {
    0.95
}
fn default_repeats() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    #[serde(default)]
    pub task: Task,
    #[serde(default)]
    pub features: FeatureSpec,
    /// Overrides the environment's discount factor.
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default = "default_alpha0")]
    pub alpha0: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// Number of bootstrap replicates.
    #[serde(default = "default_b", alias = "replicates")]
    pub b: usize,
    #[serde(default)]
    pub weight_kind: WeightKind,
    #[serde(default)]
    pub n_steps: Option<u64>,
    #[serde(default)]
    pub n_episodes: Option<u64>,
    /// Target = ε-greedy of the greedy policy (gridworlds only).
    #[serde(default)]
    pub target_epsilon: Option<f64>,
    /// Behavior = ε-greedy of the target; required for GTD tasks.
    #[serde(default)]
    pub behavior_epsilon: Option<f64>,
    #[serde(default = "default_level")]
    pub ci_level: f64,
    #[serde(default)]
    pub eval: EvalSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    /// Checkpoints in budget units (steps or episodes); defaults to powers of
    /// two up to the budget plus the budget itself.
    #[serde(default)]
    pub checkpoints: Option<Vec<u64>>,
    #[serde(default)]
    pub alpha0_grid: Vec<f64>,
    #[serde(default)]
    pub eta_grid: Vec<f64>,
}

/// Unit in which the data budget and checkpoints are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    Steps(u64),
    Episodes(u64),
}

impl Budget {
    pub fn amount(self) -> u64 {
        match self {
            Budget::Steps(n) | Budget::Episodes(n) => n,
        }
    }
}

impl ExperimentConfig {
    /// Config with every optional field at its default.
    pub fn new(env: EnvSpec) -> Self {
        Self {
            env,
            task: Task::default(),
            features: FeatureSpec::default(),
            gamma: None,
            alpha0: default_alpha0(),
            eta: default_eta(),
            b: default_b(),
            weight_kind: WeightKind::default(),
            n_steps: None,
            n_episodes: None,
            target_epsilon: None,
            behavior_epsilon: None,
            ci_level: default_level(),
            eval: EvalSpec::default(),
            seed: 0,
            repeats: default_repeats(),
            checkpoints: None,
            alpha0_grid: Vec::new(),
            eta_grid: Vec::new(),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self, HarnessError> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| HarnessError::Config(format!("config JSON: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn budget(&self) -> Result<Budget, HarnessError> {
        match (self.n_steps, self.n_episodes) {
            (Some(n), None) if n > 0 => Ok(Budget::Steps(n)),
            (None, Some(n)) if n > 0 => Ok(Budget::Episodes(n)),
            (Some(_), Some(_)) => Err(HarnessError::Config("set only one of n_steps and n_episodes".into())),
            (None, None) => Err(HarnessError::Config("one of n_steps or n_episodes is required".into())),
            _ => Err(HarnessError::Config("budget must be positive".into())),
        }
    }

    /// Sorted, deduplicated checkpoints within the budget.
    pub fn resolved_checkpoints(&self) -> Result<Vec<u64>, HarnessError> {
        let n = self.budget()?.amount();
        let mut cps = match &self.checkpoints {
            Some(list) => {
                if list.iter().any(|c| *c == 0 || *c > n) {
                    return Err(HarnessError::Config(format!("checkpoints must lie in [1, {n}]")));
                }
                list.clone()
            }
            None => {
                let mut v: Vec<u64> = (0..64).map(|k| 1u64 << k).take_while(|c| *c <= n).collect();
                v.push(n);
                v
            }
        };
        cps.sort_unstable();
        cps.dedup();
        if cps.is_empty() {
            return Err(HarnessError::Config("no checkpoints".into()));
        }
        Ok(cps)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if !(self.eta > 0.5 && self.eta < 1.0) {
            return bad(format!("eta = {} must lie in (0.5, 1)", self.eta));
        }
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return bad(format!("alpha0 = {} must be positive", self.alpha0));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return bad(format!("ci_level = {} must lie in (0, 1)", self.ci_level));
        }
        if self.b < 2 {
            return bad(format!("b = {} replicates; need at least 2", self.b));
        }
        if self.repeats == 0 {
            return bad("repeats must be at least 1".into());
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g < 1.0) {
                return bad(format!("gamma = {g} must lie in (0, 1)"));
            }
        }
        for (name, eps) in [("target_epsilon", self.target_epsilon), ("behavior_epsilon", self.behavior_epsilon)] {
            if let Some(e) = eps {
                if !(0.0..=1.0).contains(&e) {
                    return bad(format!("{name} = {e} must lie in [0, 1]"));
                }
            }
        }
        match self.task {
            Task::TdOnpolicy if self.behavior_epsilon.is_some() => {
                return bad("td_onpolicy is on-policy; behavior_epsilon is only for GTD tasks".into());
            }
            Task::GtdNeu | Task::GtdMspbe if self.behavior_epsilon.is_none() => {
                return bad("GTD tasks need behavior_epsilon".into());
            }
            _ => {}
        }
        for a in &self.alpha0_grid {
            if !(*a > 0.0 && a.is_finite()) {
                return bad(format!("alpha0 grid value {a} must be positive"));
            }
        }
        for e in &self.eta_grid {
            if !(*e > 0.5 && *e < 1.0) {
                return bad(format!("eta grid value {e} must lie in (0.5, 1)"));
            }
        }
        self.budget()?;
        self.resolved_checkpoints()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_and_full_configs() {
        let cfg = ExperimentConfig::from_json_str(r#"{"env": {"kind": "two_state"}, "n_steps": 1000}"#).unwrap();
        assert_eq!(cfg.b, 200);
        assert_eq!(cfg.eta, 0.75);
        assert_eq!(cfg.eval, EvalSpec::Start);
        assert_eq!(cfg.resolved_checkpoints().unwrap(), vec![1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1000]);

        let full = r#"{
            "env": {"kind": "random_mdp", "n_states": 20, "n_actions": 5, "dim": 5, "seed": 3},
            "task": "gtd_mspbe", "features": {"kind": "auto"}, "gamma": 0.9,
            "alpha0": 0.25, "eta": 0.6, "b": 50, "weight_kind": "two_point",
            "n_steps": 5000, "behavior_epsilon": 0.2, "ci_level": 0.9,
            "eval": {"nu": [0.05, 0.05, 0.05, 0.05, 0.05, 0.05, 0.05, 0.05, 0.05, 0.05,
                            0.05, 0.05, 0.05, 0.05, 0.05, 0.05, 0.05, 0.05, 0.05, 0.05]},
            "seed": 7, "repeats": 3, "checkpoints": [5000, 100, 1000]
        }"#;
        let cfg = ExperimentConfig::from_json_str(full).unwrap();
        assert_eq!(cfg.task, Task::GtdMspbe);
        assert_eq!(cfg.resolved_checkpoints().unwrap(), vec![100, 1000, 5000]);
        let again = ExperimentConfig::from_json_str(&cfg.to_json_string()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn rejects_invalid_configs() {
        let base = r#"{"env": {"kind": "two_state"}, "n_steps": 100"#;
        for extra in [
            r#", "eta": 0.5"#,
            r#", "eta": 1.0"#,
            r#", "ci_level": 1.0"#,
            r#", "b": 1"#,
            r#", "task": "gtd_neu""#,
            r#", "behavior_epsilon": 0.1"#,
            r#", "checkpoints": [0]"#,
            r#", "checkpoints": [101]"#,
            r#", "n_episodes": 10"#,
            r#", "eta_grid": [0.5]"#,
            r#", "unknown_field": 1"#,
        ] {
            let text = format!("{base}{extra}}}");
            assert!(
                matches!(ExperimentConfig::from_json_str(&text), Err(HarnessError::Config(_))),
                "{extra} should be rejected"
            );
        }
        assert!(ExperimentConfig::from_json_str(r#"{"env": {"kind": "two_state"}}"#).is_err());
    }
}
