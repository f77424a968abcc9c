//! Online bootstrap on the smallest possible problem: a two-state chain that
//! alternates deterministically, evaluated with tabular TD(0).
//!
//! Prints the averaged estimate of V(0) = 4/3 with both interval types at a
//! few horizons.

use online_bootstrap::bootstrap::{OnlineBootstrap, WeightKind};
use online_bootstrap::env::{two_state_chain, TrajectorySampler};
use online_bootstrap::featurize::{FeatureMap, Featurizer, LsaMode};
use online_bootstrap::lsa::StepSchedule;

fn main() {
    let (mdp, policy) = two_state_chain(0.5);
    let f = Featurizer::new(&mdp, FeatureMap::one_hot(2), LsaMode::Td, &policy, &policy).unwrap();
    let mut ob = OnlineBootstrap::new(f.dim(), StepSchedule::default(), 200, WeightKind::UniformMv1, 1);
    let c = [1.0, 0.0];

    let mut sampler = TrajectorySampler::new(&mdp, &policy, 1);
    println!("{:>7}  {:>8}  {:>21}  {:>21}", "t", "V(0)", "quantile 95%", "se 95%");
    for horizon in [100u64, 1_000, 10_000, 100_000] {
        while ob.t() < horizon {
            ob.step(&f.observe(&sampler.next_transition())).unwrap();
        }
        let (q, se) = ob.intervals(&c, 0.95).unwrap();
        println!(
            "{horizon:>7}  {:>8.5}  [{:>8.5}, {:>8.5}]  [{:>8.5}, {:>8.5}]",
            ob.estimate(&c),
            q.lower,
            q.upper,
            se.lower,
            se.upper
        );
    }
    println!("true value 4/3 = {:.5}", 4.0 / 3.0);
}
