use rayon::prelude::*;

use super::config::{Budget, EnvSpec, EvalSpec, ExperimentConfig, FeatureSpec, Task};
use super::HarnessError;
use crate::bootstrap::{
    lsa_estimator, offline_bootstrap, pad_functional, quantile_ci_from_values, value_functional, CiMethod,
    ConfidenceInterval, OnlineBootstrap, WeightKind,
};
use crate::env::{
    build_gridworld, build_random_mdp, collect_episodes, epsilon_greedy, expected_lsa_system, frozen_lake,
    two_state_chain, value_iteration, Policy, TabularMdp, TrajectorySampler,
};
use crate::featurize::{FeatureMap, Featurizer, GtdVariant, LsaMode};
use crate::lsa::{StepSchedule, DEFAULT_NORM_GUARD};
use crate::numerics::{least_squares_line, solve_linear, DenseMatrix, DenseVector};

/// One checkpoint of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    /// Checkpoint in budget units (steps or episodes).
    pub t: u64,
    /// Transitions consumed so far.
    pub steps: u64,
    pub estimate: f64,
    pub quantile: ConfidenceInterval,
    pub se: ConfidenceInterval,
    pub true_value: Option<f64>,
}

impl TraceRow {
    pub fn interval(&self, method: CiMethod) -> &ConfidenceInterval {
        match method {
            CiMethod::Quantile => &self.quantile,
            CiMethod::Se => &self.se,
        }
    }
}

pub type Trace = Vec<TraceRow>;

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageRecord {
    pub t: u64,
    pub method: CiMethod,
    pub coverage: f64,
    pub mean_width: f64,
    pub mean_abs_error: f64,
    pub repeats: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param_name: String,
    pub param_value: f64,
    pub t: u64,
    pub method: CiMethod,
    pub coverage: f64,
    pub mean_width: f64,
}

/// A configured evaluation problem, built once and run under many seeds.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub mdp: TabularMdp,
    pub target: Policy,
    pub behavior: Policy,
    pub featurizer: Featurizer,
    /// Functional `c` over the full iterate (zero on any auxiliary block).
    pub functional: Vec<f64>,
    /// `cᵀθ*` for the limit `θ*` of the iterate, when the expected system
    /// can be solved.
    pub true_value: Option<f64>,
    pub budget: Budget,
    pub checkpoints: Vec<u64>,
    pub schedule: StepSchedule,
    pub replicates: usize,
    pub weight_kind: WeightKind,
    pub level: f64,
}

impl Experiment {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self, HarnessError> {
        cfg.validate()?;
        let gamma = cfg.gamma.or(cfg.env.default_gamma());
        let mut native_features = None;
        let (mdp, base_target) = match &cfg.env {
            EnvSpec::Gridworld { width, height, holes, goal, slip } => {
                let mdp = build_gridworld(*width, *height, holes, *goal, *slip, gamma.unwrap_or(0.95))?;
                let pol = value_iteration(&mdp, 1e-10);
                (mdp, pol)
            }
            EnvSpec::FrozenLake { size, slip } => {
                let mdp = frozen_lake(*size, *slip, gamma.unwrap_or(0.95))?;
                let pol = value_iteration(&mdp, 1e-10);
                (mdp, pol)
            }
            EnvSpec::RandomMdp { n_states, n_actions, dim, seed } => {
                let rm = build_random_mdp(*n_states, *n_actions, *dim, gamma.unwrap_or(0.9), *seed)?;
                native_features = Some(rm.features);
                (rm.mdp, rm.target)
            }
            EnvSpec::TwoState => two_state_chain(gamma.unwrap_or(0.5)),
            EnvSpec::File { path } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
                let file: crate::env::MdpFile = serde_json::from_str(&text)
                    .map_err(|e| HarnessError::Config(format!("MDP file {}: {e}", path.display())))?;
                let mut mdp = TabularMdp::try_from(file)?;
                if let Some(g) = gamma {
                    mdp = mdp.with_gamma(g)?;
                }
                let pol = value_iteration(&mdp, 1e-10);
                (mdp, pol)
            }
        };
        let target = match cfg.target_epsilon {
            Some(e) => epsilon_greedy(&base_target, e),
            None => base_target,
        };
        let (mode, behavior) = match cfg.task {
            Task::TdOnpolicy => (LsaMode::Td, target.clone()),
            Task::GtdNeu | Task::GtdMspbe => {
                let variant = if cfg.task == Task::GtdNeu { GtdVariant::Neu } else { GtdVariant::Mspbe };
                let eps = cfg.behavior_epsilon.expect("validated");
                (LsaMode::Gtd(variant), epsilon_greedy(&target, eps))
            }
        };
        let features = match &cfg.features {
            FeatureSpec::Auto => native_features.unwrap_or_else(|| FeatureMap::one_hot(mdp.n_states())),
            FeatureSpec::OneHot => FeatureMap::one_hot(mdp.n_states()),
            FeatureSpec::Random { dim, seed } => FeatureMap::random(mdp.n_states(), *dim, *seed)?,
            FeatureSpec::Csv { path } => FeatureMap::from_csv_path(path)?,
        };
        let budget = cfg.budget()?;
        if matches!(budget, Budget::Episodes(_)) && !mdp.has_terminal_states() {
            return Err(HarnessError::Config("episode budgets need an environment with terminal states".into()));
        }
        let nu = match &cfg.eval {
            EvalSpec::Start => point_mass(mdp.n_states(), mdp.start_state())?,
            EvalSpec::State(s) => point_mass(mdp.n_states(), *s)?,
            EvalSpec::Nu(nu) => nu.clone(),
        };
        let featurizer = Featurizer::new(&mdp, features.clone(), mode, &target, &behavior)?;
        let c = value_functional(&features, &nu)?;
        let functional = pad_functional(&c, featurizer.dim());
        let (a_bar, b_bar) = expected_lsa_system(&mdp, &target, &behavior, &features, mode)?;
        let true_value = limit_point(&a_bar, &b_bar).map(|theta| crate::numerics::dot(&functional, theta.as_slice()));
        Ok(Self {
            mdp,
            target,
            behavior,
            featurizer,
            functional,
            true_value,
            budget,
            checkpoints: cfg.resolved_checkpoints()?,
            schedule: StepSchedule::new(cfg.alpha0, cfg.eta)?,
            replicates: cfg.b,
            weight_kind: cfg.weight_kind,
            level: cfg.ci_level,
        })
    }

    /// One seeded run. Trajectory and weights use independent streams
    /// derived from `seed`.
    pub fn run(&self, seed: u64) -> Result<Trace, HarnessError> {
        let mut sampler = TrajectorySampler::new(&self.mdp, &self.behavior, seed);
        let mut ob = OnlineBootstrap::new(self.featurizer.dim(), self.schedule, self.replicates, self.weight_kind, seed);
        let mut trace = Vec::with_capacity(self.checkpoints.len());
        let mut next = self.checkpoints.iter().copied().peekable();
        while let Some(&cp) = next.peek() {
            let tr = sampler.next_transition();
            ob.step(&self.featurizer.observe(&tr))?;
            let progress = match self.budget {
                Budget::Steps(_) => sampler.steps(),
                Budget::Episodes(_) => sampler.episodes_completed(),
            };
            if progress == cp {
                next.next();
                ob.check_norms(DEFAULT_NORM_GUARD)?;
                let (quantile, se) = ob.intervals(&self.functional, self.level)?;
                trace.push(TraceRow {
                    t: cp,
                    steps: sampler.steps(),
                    estimate: ob.estimate(&self.functional),
                    quantile,
                    se,
                    true_value: self.true_value,
                });
            }
        }
        Ok(trace)
    }
}

fn point_mass(n: usize, s: usize) -> Result<Vec<f64>, HarnessError> {
    if s >= n {
        return Err(HarnessError::Config(format!("evaluation state {s} out of range for {n} states")));
    }
    let mut nu = vec![0.0; n];
    nu[s] = 1.0;
    Ok(nu)
}

/// Solves `Āθ = b̄` on the coordinates the iterate can move. Coordinates
/// whose row and column of `Ā` vanish (states never observed) stay at their
/// zero initial value.
fn limit_point(a: &DenseMatrix, b: &DenseVector) -> Option<DenseVector> {
    if let Ok(x) = solve_linear(a, b) {
        return Some(x);
    }
    let n = a.rows();
    let live: Vec<usize> = (0..n).filter(|i| (0..n).any(|j| a[(*i, j)] != 0.0 || a[(j, *i)] != 0.0)).collect();
    let sub_b = DenseVector::new(live.iter().map(|i| b[*i]).collect());
    let sub = solve_linear(&a.principal_submatrix(&live), &sub_b).ok()?;
    let mut x = DenseVector::zeros(n);
    for (k, i) in live.iter().enumerate() {
        x[*i] = sub[k];
    }
    Some(x)
}

/// Single evaluation run at `cfg.seed`.
pub fn run_policy_eval(cfg: &ExperimentConfig) -> Result<Trace, HarnessError> {
    Experiment::from_config(cfg)?.run(cfg.seed)
}

fn in_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T, HarnessError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn run_repeats(exp: &Experiment, master_seed: u64, repeats: usize, jobs: usize) -> Result<Vec<Trace>, HarnessError> {
    in_pool(jobs, || {
        (0..repeats as u64).into_par_iter().map(|r| exp.run(master_seed.wrapping_add(r))).collect::<Result<Vec<_>, _>>()
    })?
}

/// Coverage of the true value by each interval method at every checkpoint,
/// over `cfg.repeats` runs with seeds `cfg.seed + r`. `jobs = 0` uses all
/// cores; results do not depend on it.
pub fn run_coverage(cfg: &ExperimentConfig, jobs: usize) -> Result<Vec<CoverageRecord>, HarnessError> {
    let exp = Experiment::from_config(cfg)?;
    if exp.true_value.is_none() {
        return Err(HarnessError::Config("true value is not computable for this configuration".into()));
    }
    aggregate_coverage(&run_repeats(&exp, cfg.seed, cfg.repeats, jobs)?)
}

/// Per-checkpoint, per-method coverage over a set of traces that share
/// checkpoints.
pub fn aggregate_coverage(traces: &[Trace]) -> Result<Vec<CoverageRecord>, HarnessError> {
    let first = traces.first().ok_or_else(|| HarnessError::Config("no traces to aggregate".into()))?;
    let r = traces.len();
    let mut out = Vec::with_capacity(first.len() * 2);
    for (k, row0) in first.iter().enumerate() {
        for method in CiMethod::ALL {
            let (mut covered, mut width, mut err) = (0usize, 0.0, 0.0);
            for tr in traces {
                let row = tr.get(k).filter(|row| row.t == row0.t).ok_or_else(|| {
                    HarnessError::Config("traces have different checkpoints".into())
                })?;
                let truth = row.true_value.ok_or_else(|| HarnessError::Config("trace has no true value".into()))?;
                let ci = row.interval(method);
                covered += ci.contains(truth) as usize;
                width += ci.width();
                err += (row.estimate - truth).abs();
            }
            out.push(CoverageRecord {
                t: row0.t,
                method,
                coverage: covered as f64 / r as f64,
                mean_width: width / r as f64,
                mean_abs_error: err / r as f64,
                repeats: r,
            });
        }
    }
    Ok(out)
}

/// Coverage studies varying `alpha0` over `cfg.alpha0_grid` and `eta` over
/// `cfg.eta_grid`, one parameter at a time, all with the same seeds.
pub fn run_sensitivity(cfg: &ExperimentConfig, jobs: usize) -> Result<Vec<SweepRow>, HarnessError> {
    if cfg.alpha0_grid.is_empty() && cfg.eta_grid.is_empty() {
        return Err(HarnessError::Config("sweep needs a nonempty alpha0_grid or eta_grid".into()));
    }
    cfg.validate()?;
    let mut points: Vec<(&str, f64, ExperimentConfig)> = Vec::new();
    for a in &cfg.alpha0_grid {
        points.push(("alpha0", *a, ExperimentConfig { alpha0: *a, ..cfg.clone() }));
    }
    for e in &cfg.eta_grid {
        points.push(("eta", *e, ExperimentConfig { eta: *e, ..cfg.clone() }));
    }
    let mut rows = Vec::new();
    for (name, value, point_cfg) in points {
        for rec in run_coverage(&point_cfg, jobs)? {
            rows.push(SweepRow {
                param_name: name.to_string(),
                param_value: value,
                t: rec.t,
                method: rec.method,
                coverage: rec.coverage,
                mean_width: rec.mean_width,
            });
        }
    }
    Ok(rows)
}

/// Additive floor `1 / (10 R)` inside the coverage-error logarithm.
pub fn coverage_error_floor(repeats: usize) -> f64 {
    1.0 / (10.0 * repeats as f64)
}

/// Least-squares fit of `log(|coverage − nominal| + 1/(10R))` against
/// `log t`. Returns `(slope, intercept)`.
pub fn coverage_error_regression(
    points: &[(u64, f64)],
    nominal: f64,
    repeats: usize,
) -> Result<(f64, f64), HarnessError> {
    if points.len() < 3 {
        return Err(HarnessError::InsufficientPoints(points.len()));
    }
    let floor = coverage_error_floor(repeats);
    let x: Vec<f64> = points.iter().map(|(t, _)| (*t as f64).ln()).collect();
    let y: Vec<f64> = points.iter().map(|(_, c)| ((c - nominal).abs() + floor).ln()).collect();
    least_squares_line(&x, &y).ok_or(HarnessError::InsufficientPoints(points.len()))
}

/// Regression per method over a coverage table.
pub fn regress_coverage(
    records: &[CoverageRecord],
    nominal: f64,
) -> Result<Vec<super::RegressionRow>, HarnessError> {
    let mut out = Vec::new();
    for method in CiMethod::ALL {
        let rows: Vec<&CoverageRecord> = records.iter().filter(|r| r.method == method).collect();
        if rows.is_empty() {
            continue;
        }
        let repeats = rows[0].repeats;
        let points: Vec<(u64, f64)> = rows.iter().map(|r| (r.t, r.coverage)).collect();
        let (slope, intercept) = coverage_error_regression(&points, nominal, repeats)?;
        out.push(super::RegressionRow {
            method,
            slope,
            intercept,
            points: points.len(),
            floor: coverage_error_floor(repeats),
        });
    }
    Ok(out)
}

/// Online and offline quantile intervals computed on the same episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineComparison {
    pub estimate: f64,
    pub online: ConfidenceInterval,
    pub offline: ConfidenceInterval,
    pub n_steps: u64,
    pub true_value: Option<f64>,
}

/// Draws `n_episodes` episodes, runs the online bootstrap over them, then
/// resamples the same episodes `B` times for the offline bootstrap.
pub fn run_offline_comparison(cfg: &ExperimentConfig) -> Result<OfflineComparison, HarnessError> {
    let exp = Experiment::from_config(cfg)?;
    let n = match exp.budget {
        Budget::Episodes(n) => n as usize,
        Budget::Steps(_) => return Err(HarnessError::Config("the offline comparison needs n_episodes".into())),
    };
    let mut sampler = TrajectorySampler::new(&exp.mdp, &exp.behavior, cfg.seed);
    let episodes = collect_episodes(&mut sampler, n);
    let mut ob =
        OnlineBootstrap::new(exp.featurizer.dim(), exp.schedule, exp.replicates, exp.weight_kind, cfg.seed);
    for tr in episodes.iter().flatten() {
        ob.step(&exp.featurizer.observe(tr))?;
    }
    let (online, _) = ob.intervals(&exp.functional, exp.level)?;
    let estimate = ob.estimate(&exp.functional);
    let estimates = offline_bootstrap(&episodes, exp.replicates, lsa_estimator(&exp.featurizer, exp.schedule), cfg.seed)?;
    let values: Vec<f64> = estimates.iter().map(|th| crate::numerics::dot(&exp.functional, th.as_slice())).collect();
    let offline = quantile_ci_from_values(estimate, &values, exp.level)?;
    Ok(OfflineComparison { estimate, online, offline, n_steps: ob.t(), true_value: exp.true_value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ci(lower: f64, upper: f64, method: CiMethod) -> ConfidenceInterval {
        ConfidenceInterval { lower, upper, level: 0.95, method }
    }

    fn row(t: u64, lo: f64, hi: f64, truth: f64) -> TraceRow {
        TraceRow {
            t,
            steps: t,
            estimate: (lo + hi) / 2.0,
            quantile: ci(lo, hi, CiMethod::Quantile),
            se: ci(lo, hi, CiMethod::Se),
            true_value: Some(truth),
        }
    }

    #[test]
    fn whole_line_intervals_always_cover() {
        let traces: Vec<Trace> =
            (0..4).map(|_| vec![row(1, f64::NEG_INFINITY, f64::INFINITY, 0.3), row(2, f64::NEG_INFINITY, f64::INFINITY, 0.3)]).collect();
        for rec in aggregate_coverage(&traces).unwrap() {
            assert_eq!(rec.coverage, 1.0);
        }
    }

    #[test]
    fn coverage_counts() {
        let traces = vec![vec![row(10, 0.0, 1.0, 0.5)], vec![row(10, 0.0, 1.0, 0.5)], vec![row(10, 0.6, 1.0, 0.5)]];
        let recs = aggregate_coverage(&traces).unwrap();
        assert_eq!(recs.len(), 2);
        for rec in recs {
            assert_abs_diff_eq!(rec.coverage, 2.0 / 3.0, epsilon = 1e-15);
            assert_abs_diff_eq!(rec.mean_width, (1.0 + 1.0 + 0.4) / 3.0, epsilon = 1e-15);
            assert_eq!(rec.repeats, 3);
        }
    }

    #[test]
    fn regression_slopes() {
        // A huge repeat count makes the additive floor negligible.
        let r = 1_000_000_000_000;
        let ts = [100u64, 1000, 10_000];
        let exact = |f: &dyn Fn(f64) -> f64| ts.iter().map(|t| (*t, 0.95 - f(*t as f64))).collect::<Vec<_>>();
        let (s, _) = coverage_error_regression(&exact(&|t| 0.5 / t), 0.95, r).unwrap();
        assert_abs_diff_eq!(s, -1.0, epsilon = 1e-6);
        let (s, _) = coverage_error_regression(&exact(&|t| 0.3 / t.sqrt()), 0.95, r).unwrap();
        assert_abs_diff_eq!(s, -0.5, epsilon = 1e-6);
        let (s, _) = coverage_error_regression(&exact(&|_| 0.1), 0.95, 100).unwrap();
        assert_abs_diff_eq!(s, 0.0, epsilon = 1e-12);
        assert_eq!(coverage_error_regression(&[(1, 0.9), (2, 0.9)], 0.95, 10), Err(HarnessError::InsufficientPoints(2)));
        // Exact nominal coverage lands on the floor instead of log(0).
        let (s, i) = coverage_error_regression(&[(1, 0.95), (2, 0.95), (4, 0.95)], 0.95, 100).unwrap();
        assert_eq!(s, 0.0);
        assert_abs_diff_eq!(i, (1e-3f64).ln(), epsilon = 1e-12);
    }

    #[test]
    fn limit_point_on_live_support() {
        let a = DenseMatrix::from_rows(&[vec![2.0, 0.0, 0.0], vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]]);
        let b = DenseVector::new(vec![1.0, 0.0, 3.0]);
        assert_eq!(limit_point(&a, &b).unwrap().as_slice(), &[0.5, 0.0, 3.0]);
    }

    #[test]
    fn two_state_trace_converges() {
        let mut cfg = ExperimentConfig::new(EnvSpec::TwoState);
        cfg.n_steps = Some(100_000);
        cfg.checkpoints = Some(vec![1000, 10_000, 100_000]);
        cfg.b = 20;
        let trace = run_policy_eval(&cfg).unwrap();
        assert_eq!(trace.iter().map(|r| r.t).collect::<Vec<_>>(), vec![1000, 10_000, 100_000]);
        let truth = trace[0].true_value.unwrap();
        assert_abs_diff_eq!(truth, 4.0 / 3.0, epsilon = 1e-12);
        let errs: Vec<f64> = trace.iter().map(|r| (r.estimate - truth).abs()).collect();
        assert!(errs[2] < errs[0] && errs[2] < 0.02, "{errs:?}");
        for r in &trace {
            assert!(r.quantile.width().is_finite() && r.se.width().is_finite());
        }
        assert_eq!(trace, run_policy_eval(&cfg).unwrap());
    }

    #[test]
    fn coverage_is_independent_of_jobs() {
        let mut cfg = ExperimentConfig::new(EnvSpec::FrozenLake { size: 4, slip: 0.2 });
        cfg.n_episodes = Some(20);
        cfg.b = 10;
        cfg.repeats = 4;
        let a = run_coverage(&cfg, 1).unwrap();
        let b = run_coverage(&cfg, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2 * cfg.resolved_checkpoints().unwrap().len());
    }

    #[test]
    fn singleton_sweep_equals_coverage() {
        let mut cfg = ExperimentConfig::new(EnvSpec::TwoState);
        cfg.n_steps = Some(256);
        cfg.b = 5;
        cfg.repeats = 3;
        cfg.alpha0_grid = vec![cfg.alpha0];
        let cov = run_coverage(&cfg, 1).unwrap();
        let sweep = run_sensitivity(&cfg, 1).unwrap();
        assert_eq!(sweep.len(), cov.len());
        for (s, c) in sweep.iter().zip(&cov) {
            assert_eq!((s.t, s.method, s.coverage, s.mean_width), (c.t, c.method, c.coverage, c.mean_width));
        }
        cfg.eta_grid = vec![0.5];
        assert!(matches!(run_sensitivity(&cfg, 1), Err(HarnessError::Config(_))));
    }

    #[test]
    fn gtd_experiment_targets_true_value() {
        let mut cfg = ExperimentConfig::new(EnvSpec::RandomMdp { n_states: 10, n_actions: 3, dim: 3, seed: 1 });
        cfg.task = Task::GtdMspbe;
        cfg.behavior_epsilon = Some(0.2);
        cfg.n_steps = Some(10);
        let exp = Experiment::from_config(&cfg).unwrap();
        let rm = build_random_mdp(10, 3, 3, 0.9, 1).unwrap();
        let v = rm.features.table().mul_vec(&rm.theta_true);
        assert_abs_diff_eq!(exp.true_value.unwrap(), v[0], epsilon = 1e-8);
        assert_eq!(exp.functional.len(), 6);
    }

    #[test]
    fn episode_budget_needs_terminal_states() {
        let mut cfg = ExperimentConfig::new(EnvSpec::TwoState);
        cfg.n_episodes = Some(5);
        assert!(matches!(Experiment::from_config(&cfg), Err(HarnessError::Config(_))));
    }
}
