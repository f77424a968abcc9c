//! Monte-Carlo coverage of the 95% intervals on 8×8 FrozenLake.
//!
//! Runs `repeats` independent evaluations (seeds `seed..seed+repeats`) in
//! parallel and reports, per checkpoint, how often each interval contained
//! the true value.
//!
//! Usage: `cargo run --release --example frozen_lake_coverage [repeats] [episodes]`

use online_bootstrap::harness::{run_coverage, EnvSpec, ExperimentConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let repeats = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let episodes = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1000);

    let mut cfg = ExperimentConfig::new(EnvSpec::FrozenLake { size: 8, slip: 0.2 });
    cfg.n_episodes = Some(episodes);
    cfg.alpha0 = 20.0;
    cfg.repeats = repeats;

    let records = run_coverage(&cfg, 0).expect("coverage run");
    println!("{:>6}  {:>8}  {:>8}  {:>10}", "ep", "method", "coverage", "mean width");
    for r in &records {
        println!("{:>6}  {:>8}  {:>8.3}  {:>10.5}", r.t, r.method, r.coverage, r.mean_width);
    }
}
