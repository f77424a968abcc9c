//! How interval width and coverage respond to the step-size schedule
//! `α_t = α₀ t^(−η)`, varying one parameter at a time.

use online_bootstrap::harness::{run_sensitivity, EnvSpec, ExperimentConfig, FeatureSpec};

fn main() {
    let mut cfg = ExperimentConfig::new(EnvSpec::RandomMdp { n_states: 5, n_actions: 2, dim: 4, seed: 7 });
    cfg.gamma = Some(0.5);
    cfg.features = FeatureSpec::OneHot;
    cfg.n_steps = Some(20_000);
    cfg.b = 100;
    cfg.repeats = 20;
    cfg.alpha0_grid = vec![0.25, 0.5, 1.0, 2.0];
    cfg.eta_grid = vec![0.6, 0.75, 0.9];
    cfg.checkpoints = Some(vec![20_000]);

    let rows = run_sensitivity(&cfg, 0).expect("sweep runs");
    println!("{:>6}  {:>5}  {:>8}  {:>8}  {:>10}", "param", "value", "method", "coverage", "mean width");
    for r in &rows {
        println!("{:>6}  {:>5}  {:>8}  {:>8.2}  {:>10.5}", r.param_name, r.param_value, r.method, r.coverage, r.mean_width);
    }
}
