//! Online versus offline (episode-resampling) bootstrap on a 4×4 FrozenLake.
//!
//! With the default 500 episodes and a small initial step the estimate is
//! still far below the true value; the point of the example is the width of
//! the two bootstrap intervals at equal data, not their location.
//!
//! Usage: `cargo run --release --example offline_vs_online [episodes] [alpha0] [seed]`

use online_bootstrap::harness::{run_offline_comparison, EnvSpec, ExperimentConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let episodes = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(500);
    let alpha0 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let seed = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(9);

    let mut cfg = ExperimentConfig::new(EnvSpec::FrozenLake { size: 4, slip: 0.2 });
    cfg.n_episodes = Some(episodes);
    cfg.alpha0 = alpha0;
    cfg.b = 100;
    cfg.seed = seed;
    let cmp = run_offline_comparison(&cfg).expect("comparison runs");

    println!("episodes {episodes}, transitions {}, alpha0 {alpha0}", cmp.n_steps);
    println!("true start-state value  {:.4}", cmp.true_value.unwrap_or(f64::NAN));
    println!("estimate                {:.4}", cmp.estimate);
    println!("online  95% quantile CI [{:.4}, {:.4}] width {:.4}", cmp.online.lower, cmp.online.upper, cmp.online.width());
    println!("offline 95% quantile CI [{:.4}, {:.4}] width {:.4}", cmp.offline.lower, cmp.offline.upper, cmp.offline.width());
}
