//! Compares the bootstrap distribution from one run with the sampling
//! distribution of the averaged iterate across independent reruns.

use online_bootstrap::bootstrap::{OnlineBootstrap, WeightKind};
use online_bootstrap::env::{build_random_mdp, expected_lsa_system, TrajectorySampler};
use online_bootstrap::featurize::{FeatureMap, Featurizer, LsaMode};
use online_bootstrap::lsa::{LsaState, StepSchedule};
use online_bootstrap::numerics::solve_linear;
use rayon::prelude::*;

fn sd(x: &[f64]) -> f64 {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

fn main() {
    let rm = build_random_mdp(5, 2, 4, 0.5, 7).unwrap();
    let f = Featurizer::new(&rm.mdp, FeatureMap::one_hot(5), LsaMode::Td, &rm.target, &rm.target).unwrap();
    let (a, b) = expected_lsa_system(&rm.mdp, &rm.target, &rm.target, f.features(), LsaMode::Td).unwrap();
    let theta_star = solve_linear(&a, &b).unwrap();
    let schedule = StepSchedule::new(2.0, 0.75).unwrap();
    let c = [1.0, 0.0, 0.0, 0.0, 0.0];

    for t in [1_000usize, 10_000, 100_000] {
        let reruns: Vec<f64> = (0..200u64)
            .into_par_iter()
            .map(|seed| {
                let mut st = LsaState::zeros(5);
                for tr in TrajectorySampler::new(&rm.mdp, &rm.target, 1000 + seed).take(t) {
                    st.step(&f.observe(&tr), schedule.step_size(st.t() + 1)).unwrap();
                }
                st.functional_of_bar(&c) - theta_star[0]
            })
            .collect();
        let mut ob = OnlineBootstrap::new(5, schedule, 200, WeightKind::UniformMv1, 1);
        for tr in TrajectorySampler::new(&rm.mdp, &rm.target, 99).take(t) {
            ob.step(&f.observe(&tr)).unwrap();
        }
        let boot = ob.ensemble().functional_values(&c);
        let scale = (t as f64).sqrt();
        println!(
            "t {t:>6}: sqrt(t)*SD bootstrap {:.4}, reruns {:.4}, ratio {:.3}",
            scale * sd(&boot),
            scale * sd(&reruns),
            sd(&boot) / sd(&reruns)
        );
    }
}
