//! A single evaluation run on 8×8 FrozenLake, written as a CSV trace.
//!
//! The policy is the greedy policy from value iteration, the features are
//! one-hot and the target is the value of the start state.
//!
//! Usage: `cargo run --release --example frozen_lake_trace [episodes] [out.csv]`

use std::fs::File;
use std::io::{self, Write};

use online_bootstrap::harness::{run_policy_eval, write_trace_csv, EnvSpec, ExperimentConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let episodes = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1000);

    let mut cfg = ExperimentConfig::new(EnvSpec::FrozenLake { size: 8, slip: 0.2 });
    cfg.n_episodes = Some(episodes);
    // Value has to travel ~14 cells back from the goal; small initial steps
    // leave the start state near zero for thousands of episodes.
    cfg.alpha0 = 20.0;
    cfg.seed = 3;

    let trace = run_policy_eval(&cfg).expect("run succeeds");
    let out: Box<dyn Write> = match args.get(2) {
        Some(path) => Box::new(File::create(path).expect("output file")),
        None => Box::new(io::stdout()),
    };
    write_trace_csv(out, &trace).expect("write trace");

    let last = trace.last().unwrap();
    eprintln!(
        "after {} episodes ({} steps): estimate {:.4}, true {:.4}, quantile CI width {:.4}",
        last.t,
        last.steps,
        last.estimate,
        last.true_value.unwrap_or(f64::NAN),
        last.quantile.width()
    );
}
