//! Rate at which the coverage error |coverage − 0.95| shrinks with the
//! number of episodes on 8×8 FrozenLake, from a log-log regression over the
//! geometric checkpoints.
//!
//! Usage: `cargo run --release --example coverage_error_rate [repeats]`

use online_bootstrap::harness::{coverage_error_floor, regress_coverage, run_coverage, EnvSpec, ExperimentConfig};

fn main() {
    let repeats = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let mut cfg = ExperimentConfig::new(EnvSpec::FrozenLake { size: 8, slip: 0.2 });
    cfg.n_episodes = Some(1000);
    cfg.alpha0 = 20.0;
    cfg.repeats = repeats;

    let records = run_coverage(&cfg, 0).expect("coverage run");
    for r in &records {
        println!("episodes {:>5}  {:>8}  coverage {:.3}", r.t, r.method, r.coverage);
    }
    println!("floor 1/(10R) = {}", coverage_error_floor(cfg.repeats));
    for row in regress_coverage(&records, 0.95).expect("regression") {
        println!("{:>8}: slope {:.3}, intercept {:.3} over {} checkpoints", row.method, row.slope, row.intercept, row.points);
    }
}
