use super::{Policy, TabularMdp};

/// Greedy deterministic policy from value iteration, iterated until the
/// sup-norm change is at most `tol`. Ties go to the lowest action index.
pub fn value_iteration(mdp: &TabularMdp, tol: f64) -> Policy {
    assert!(tol > 0.0, "tolerance must be positive");
    let n = mdp.n_states();
    let gamma = mdp.gamma();
    let mut v = vec![0.0; n];
    loop {
        let mut next = vec![0.0; n];
        for s in (0..n).filter(|s| !mdp.is_terminal(*s)) {
            next[s] = (0..mdp.n_actions()).map(|a| q_value(mdp, &v, s, a, gamma)).fold(f64::NEG_INFINITY, f64::max);
        }
        let change = v.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if change <= tol {
            break;
        }
    }
    let actions: Vec<usize> = (0..n)
        .map(|s| {
            if mdp.is_terminal(s) {
                return 0;
            }
            let mut best = 0;
            let mut best_q = q_value(mdp, &v, s, 0, gamma);
            for a in 1..mdp.n_actions() {
                let q = q_value(mdp, &v, s, a, gamma);
                if q > best_q + 1e-12 {
                    best = a;
                    best_q = q;
                }
            }
            best
        })
        .collect();
    Policy::deterministic(&actions, mdp.n_actions()).expect("greedy actions are in range")
}

fn q_value(mdp: &TabularMdp, v: &[f64], s: usize, a: usize, gamma: f64) -> f64 {
    mdp.next_state_probs(s, a)
        .iter()
        .zip(mdp.rewards(s, a))
        .zip(v)
        .map(|((p, r), vn)| p * (r + gamma * vn))
        .sum()
}

/// `π_ε(a|s) = (1 − ε)·π(a|s) + ε / |A|`.
pub fn epsilon_greedy(base: &Policy, epsilon: f64) -> Policy {
    assert!((0.0..=1.0).contains(&epsilon), "epsilon must lie in [0, 1]");
    let na = base.n_actions();
    let probs = (0..base.n_states())
        .flat_map(|s| base.row(s).iter().map(move |p| (1.0 - epsilon) * p + epsilon / na as f64))
        .collect();
    Policy::new(base.n_states(), na, probs).expect("mixture of distributions is a distribution")
}
