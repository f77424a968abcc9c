//! Features loaded from CSV (header `f0,f1,...`, one row per state) and used
//! for TD on a 4×4 gridworld without holes.

use online_bootstrap::bootstrap::{value_functional, OnlineBootstrap, WeightKind};
use online_bootstrap::env::{build_gridworld, true_value, induce_mrp, value_iteration, TrajectorySampler};
use online_bootstrap::featurize::{FeatureMap, Featurizer, LsaMode};
use online_bootstrap::lsa::StepSchedule;

fn main() {
    // Bias, row, column and an indicator of the cells next to the goal.
    let mut csv = String::from("f0,f1,f2,f3\n");
    for s in 0..16 {
        let (row, col) = (s / 4, s % 4);
        let near_goal = if s == 14 || s == 11 { 1.0 } else { 0.0 };
        csv += &format!("1,{},{},{near_goal}\n", row as f64 / 3.0, col as f64 / 3.0);
    }
    let features = FeatureMap::from_csv_reader(csv.as_bytes()).expect("valid feature table");
    println!("loaded {} states x {} features", features.n_states(), features.dim());

    let mdp = build_gridworld(4, 4, &[], 15, 0.2, 0.95).unwrap();
    let policy = value_iteration(&mdp, 1e-10);
    let f = Featurizer::new(&mdp, features.clone(), LsaMode::Td, &policy, &policy).unwrap();

    let mut ob = OnlineBootstrap::new(f.dim(), StepSchedule::default(), 200, WeightKind::UniformMv1, 4);
    for tr in TrajectorySampler::new(&mdp, &policy, 4).take(100_000) {
        ob.step(&f.observe(&tr)).unwrap();
    }

    let mut nu = vec![0.0; 16];
    nu[0] = 1.0;
    let c = value_functional(&features, &nu).unwrap().into_vec();
    let (q, _) = ob.intervals(&c, 0.95).unwrap();
    let v = true_value(&induce_mrp(&mdp, &policy).unwrap()).unwrap();
    // With four features the TD fixed point is a projection, so the interval
    // targets Φθ*, which generally differs from the true V(0).
    println!("start value: estimate {:.4}, 95% [{:.4}, {:.4}], tabular V(0) {:.4}", ob.estimate(&c), q.lower, q.upper, v[0]);
}
