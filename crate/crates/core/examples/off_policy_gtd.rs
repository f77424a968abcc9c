//! Off-policy evaluation with GTD on a random MDP whose target value is
//! exactly linear in the features.
//!
//! Data come from an ε-greedy version of the target policy. The stacked
//! iterate is `(θ, y)`; only the θ block is reported.

use online_bootstrap::bootstrap::{value_functional, OnlineBootstrap, WeightKind};
use online_bootstrap::env::{build_random_mdp, epsilon_greedy, TrajectorySampler};
use online_bootstrap::featurize::{Featurizer, GtdVariant, LsaMode};
use online_bootstrap::lsa::StepSchedule;

fn main() {
    let rm = build_random_mdp(20, 5, 5, 0.9, 2024).unwrap();
    let behavior = epsilon_greedy(&rm.target, 0.2);
    let f = Featurizer::new(&rm.mdp, rm.features.clone(), LsaMode::Gtd(GtdVariant::Mspbe), &rm.target, &behavior).unwrap();
    let d = rm.features.dim();

    let mut ob = OnlineBootstrap::new(f.dim(), StepSchedule::default(), 200, WeightKind::UniformMv1, 5);
    for tr in TrajectorySampler::new(&rm.mdp, &behavior, 5).take(200_000) {
        ob.step(&f.observe(&tr)).unwrap();
    }

    let theta_bar = ob.theta_bar();
    println!("coordinate  estimate    true");
    for i in 0..d {
        println!("{i:>10}  {:>8.4}  {:>6.4}", theta_bar[i], rm.theta_true[i]);
    }

    // Value of state 0, padded with zeros for the y block.
    let mut nu = vec![0.0; 20];
    nu[0] = 1.0;
    let mut c = value_functional(&rm.features, &nu).unwrap().into_vec();
    c.resize(f.dim(), 0.0);
    let truth: f64 = (0..d).map(|i| c[i] * rm.theta_true[i]).sum();
    let (q, se) = ob.intervals(&c, 0.95).unwrap();
    println!("V(0): estimate {:.4}, true {truth:.4}", ob.estimate(&c));
    println!("quantile 95% [{:.4}, {:.4}]", q.lower, q.upper);
    println!("se       95% [{:.4}, {:.4}]", se.lower, se.upper);
}
