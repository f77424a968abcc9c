//! Analytic quantities: induced MRPs, true values, stationary distributions and
//! the expected linear system that TD/GTD iterates solve.

use super::{EnvError, Mrp, Policy, TabularMdp};
use crate::featurize::{FeatureMap, GtdVariant, LsaMode};
use crate::numerics::{solve_linear, DenseMatrix, DenseVector};

/// Weight kept on the original kernel when damping power iteration; the rest
/// is a self-loop, which leaves the fixed point unchanged.
pub const DEFAULT_DAMPING: f64 = 0.999;

const MAX_POWER_ITERATIONS: usize = 1_000_000;
const POWER_TOL: f64 = 1e-12;

/// Replace terminal rows by a unit jump to `start` before iterating.
#[derive(Debug, Clone, Copy)]
pub struct Restart<'a> {
    pub terminal: &'a [bool],
    pub start: usize,
}

pub fn induce_mrp(mdp: &TabularMdp, policy: &Policy) -> Result<Mrp, EnvError> {
    policy.check_matches(mdp)?;
    let n = mdp.n_states();
    let mut kernel = DenseMatrix::zeros(n, n);
    let mut reward = DenseVector::zeros(n);
    for s in 0..n {
        for a in 0..mdp.n_actions() {
            let pa = policy.prob(s, a);
            if pa == 0.0 {
                continue;
            }
            let probs = mdp.next_state_probs(s, a);
            let rews = mdp.rewards(s, a);
            let row = kernel.row_mut(s);
            let mut expected = 0.0;
            for (sp, (p, r)) in probs.iter().zip(rews).enumerate() {
                row[sp] += pa * p;
                expected += p * r;
            }
            reward[s] += pa * expected;
        }
    }
    Ok(Mrp {
        kernel,
        expected_reward: reward,
        gamma: mdp.gamma(),
        terminal: mdp.terminal_mask().to_vec(),
        start_state: mdp.start_state(),
    })
}

/// Solves the Bellman equation `V = r + γ P V`.
pub fn true_value(mrp: &Mrp) -> Result<DenseVector, EnvError> {
    let n = mrp.kernel.rows();
    let system = DenseMatrix::identity(n).sub(&mrp.kernel.scaled(mrp.gamma));
    let mut v = solve_linear(&system, &mrp.expected_reward)?;
    for (s, term) in mrp.terminal.iter().enumerate() {
        if *term {
            v[s] = 0.0;
        }
    }
    Ok(v)
}

/// Left fixed point `μ P = μ` by power iteration from a point mass on the
/// start state (or state 0 without restart).
///
/// With `damping = Some(λ)` the iteration runs on `λ P + (1 - λ) I`, which is
/// aperiodic and shares the fixed point of `P`; one undamped step is applied
/// to the result.
pub fn stationary_distribution(
    kernel: &DenseMatrix,
    restart: Option<Restart<'_>>,
    damping: Option<f64>,
) -> Result<DenseVector, EnvError> {
    if !kernel.is_square() {
        return Err(EnvError::DimensionMismatch("kernel must be square".into()));
    }
    let n = kernel.rows();
    let mut chain = kernel.clone();
    let mut init = 0;
    if let Some(r) = restart {
        if r.terminal.len() != n || r.start >= n {
            return Err(EnvError::DimensionMismatch("restart mask does not match kernel".into()));
        }
        for (s, term) in r.terminal.iter().enumerate() {
            if *term {
                let row = chain.row_mut(s);
                row.iter_mut().for_each(|p| *p = 0.0);
                row[r.start] = 1.0;
            }
        }
        init = r.start;
    }
    if let Some(lambda) = damping {
        assert!(lambda > 0.0 && lambda <= 1.0, "damping must be in (0, 1]");
        chain = chain.scaled(lambda);
        for i in 0..n {
            chain[(i, i)] += 1.0 - lambda;
        }
    }

    let mut mu = vec![0.0; n];
    mu[init] = 1.0;
    let mut next = vec![0.0; n];
    let mut converged = false;
    for _ in 0..MAX_POWER_ITERATIONS {
        left_multiply(&mu, &chain, &mut next);
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        let change: f64 = mu.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut mu, &mut next);
        if change <= POWER_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(EnvError::NonConvergence(MAX_POWER_ITERATIONS));
    }
    if damping.is_some() {
        // Undamped refinement on the (possibly restart-augmented) chain.
        let mut undamped = kernel.clone();
        if let Some(r) = restart {
            for (s, term) in r.terminal.iter().enumerate() {
                if *term {
                    let row = undamped.row_mut(s);
                    row.iter_mut().for_each(|p| *p = 0.0);
                    row[r.start] = 1.0;
                }
            }
        }
        left_multiply(&mu, &undamped, &mut next);
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        mu = next;
    }
    Ok(DenseVector::new(mu))
}

fn left_multiply(mu: &[f64], p: &DenseMatrix, out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    for (i, m) in mu.iter().enumerate() {
        if *m == 0.0 {
            continue;
        }
        for (o, pij) in out.iter_mut().zip(p.row(i)) {
            *o += m * pij;
        }
    }
}

/// Long-run frequency of each state as the *current* state of an observed
/// transition under `behavior`, with episodes concatenated by an unobserved
/// restart. Terminal states are never observed and get zero mass.
pub fn observation_distribution(mdp: &TabularMdp, behavior: &Policy) -> Result<DenseVector, EnvError> {
    let mrp = induce_mrp(mdp, behavior)?;
    let restart = Restart { terminal: mdp.terminal_mask(), start: mdp.start_state() };
    let mut mu = stationary_distribution(&mrp.kernel, Some(restart), Some(DEFAULT_DAMPING))?;
    for (s, term) in mdp.terminal_mask().iter().enumerate() {
        if *term {
            mu[s] = 0.0;
        }
    }
    let total: f64 = mu.iter().sum();
    mu.as_mut_slice().iter_mut().for_each(|x| *x /= total);
    Ok(mu)
}

/// Expected `(Ā, b̄)` of the observations produced by
/// [`crate::featurize::Featurizer`] on the stationary behavior stream.
///
/// TD: `Ā = ΦᵀΞ(I − γP̃)Φ`, `b̄ = ΦᵀΞr`. GTD: the stacked `2d` system
/// `[[0, −Aᵀ], [A, M]]`, `(0, b)`. `P̃` is the target kernel with transitions
/// into terminal states zeroed, and `Ξ` holds the behavior observation
/// distribution.
pub fn expected_lsa_system(
    mdp: &TabularMdp,
    target: &Policy,
    behavior: &Policy,
    features: &FeatureMap,
    mode: LsaMode,
) -> Result<(DenseMatrix, DenseVector), EnvError> {
    target.check_matches(mdp)?;
    behavior.check_matches(mdp)?;
    if features.n_states() != mdp.n_states() {
        return Err(EnvError::DimensionMismatch(format!(
            "feature map covers {} states, MDP has {}",
            features.n_states(),
            mdp.n_states()
        )));
    }
    if mode == LsaMode::Td && target != behavior {
        return Err(EnvError::OffPolicyTd);
    }
    for s in (0..mdp.n_states()).filter(|s| !mdp.is_terminal(*s)) {
        for a in 0..mdp.n_actions() {
            if target.prob(s, a) > 0.0 && behavior.prob(s, a) == 0.0 {
                return Err(EnvError::ZeroBehaviorProbability { state: s, action: a });
            }
        }
    }

    let mu = observation_distribution(mdp, behavior)?;
    let mrp = induce_mrp(mdp, target)?;
    let n = mdp.n_states();
    let gamma = mdp.gamma();
    let phi = features.table();

    let mut kernel = mrp.kernel.clone();
    for i in 0..n {
        for (j, term) in mdp.terminal_mask().iter().enumerate() {
            if *term {
                kernel[(i, j)] = 0.0;
            }
        }
    }
    // (I − γP̃)Φ
    let propagated = phi.sub(&kernel.matmul(phi).scaled(gamma));
    let mut weighted_phi_t = phi.transpose();
    for k in 0..weighted_phi_t.rows() {
        for (s, m) in mu.iter().enumerate() {
            weighted_phi_t[(k, s)] *= m;
        }
    }
    let a = weighted_phi_t.matmul(&propagated);
    let b = weighted_phi_t.mul_vec(&mrp.expected_reward);

    match mode {
        LsaMode::Td => Ok((a, b)),
        LsaMode::Gtd(variant) => {
            let d = features.dim();
            let metric = match variant {
                GtdVariant::Neu => DenseMatrix::identity(d),
                GtdVariant::Mspbe => weighted_phi_t.matmul(phi),
            };
            let mut stacked = DenseMatrix::zeros(2 * d, 2 * d);
            for i in 0..d {
                for j in 0..d {
                    stacked[(i, d + j)] = -a[(j, i)];
                    stacked[(d + i, j)] = a[(i, j)];
                    stacked[(d + i, d + j)] = metric[(i, j)];
                }
            }
            let mut rhs = DenseVector::zeros(2 * d);
            for i in 0..d {
                rhs[d + i] = b[i];
            }
            Ok((stacked, rhs))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{build_gridworld, build_random_mdp, two_state_chain, value_iteration};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_stochastic(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
        (0..rows)
            .map(|_| {
                let raw: Vec<f64> = (0..cols).map(|_| -rng.random::<f64>().ln()).collect();
                let t: f64 = raw.iter().sum();
                raw.into_iter().map(|x| x / t).collect()
            })
            .collect()
    }

    fn random_mdp_tensors(seed: u64, n: usize, na: usize) -> (TabularMdp, Policy) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Vec::new();
        for _ in 0..n * na {
            p.extend(random_stochastic(&mut rng, 1, n).remove(0));
        }
        let r: Vec<f64> = (0..n * na * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mdp = TabularMdp::new(n, na, p, r, 0.9, vec![false; n], 0).unwrap();
        let pol = Policy::from_rows(&random_stochastic(&mut rng, n, na)).unwrap();
        (mdp, pol)
    }

    #[test]
    fn induce_mrp_matches_double_loop() {
        let (mdp, pol) = random_mdp_tensors(3, 5, 3);
        let mrp = induce_mrp(&mdp, &pol).unwrap();
        for s in 0..5 {
            let mut r = 0.0;
            for sp in 0..5 {
                let mut p = 0.0;
                for a in 0..3 {
                    p += pol.prob(s, a) * mdp.prob(s, a, sp);
                    r += pol.prob(s, a) * mdp.prob(s, a, sp) * mdp.reward(s, a, sp);
                }
                assert_abs_diff_eq!(mrp.kernel[(s, sp)], p, epsilon = 1e-14);
            }
            assert_abs_diff_eq!(mrp.expected_reward[s], r, epsilon = 1e-14);
        }
    }

    #[test]
    fn induce_mrp_degenerate_and_uniform_mixtures() {
        let (mdp, _) = random_mdp_tensors(4, 4, 2);
        let det = Policy::deterministic(&[1, 1, 1, 1], 2).unwrap();
        let mrp = induce_mrp(&mdp, &det).unwrap();
        for s in 0..4 {
            assert_eq!(mrp.kernel.row(s), mdp.next_state_probs(s, 1));
        }
        let uni = Policy::uniform(4, 2);
        let mrp = induce_mrp(&mdp, &uni).unwrap();
        for s in 0..4 {
            for sp in 0..4 {
                let mean = 0.5 * (mdp.prob(s, 0, sp) + mdp.prob(s, 1, sp));
                assert_abs_diff_eq!(mrp.kernel[(s, sp)], mean, epsilon = 1e-15);
            }
        }
        assert!(matches!(induce_mrp(&mdp, &Policy::uniform(3, 2)), Err(EnvError::DimensionMismatch(_))));
    }

    #[test]
    fn true_value_two_state() {
        let (mdp, pol) = two_state_chain(0.5);
        let v = true_value(&induce_mrp(&mdp, &pol).unwrap()).unwrap();
        assert_abs_diff_eq!(v[0], 4.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v[1], 2.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn true_value_vanishing_discount() {
        let (mdp, pol) = random_mdp_tensors(8, 6, 2);
        let mrp = induce_mrp(&mdp.with_gamma(1e-12).unwrap(), &pol).unwrap();
        let v = true_value(&mrp).unwrap();
        assert!(v.sub(&mrp.expected_reward).norm_inf() <= 1e-10);
    }

    #[test]
    fn true_value_matches_truncated_series() {
        let (mdp, pol) = random_mdp_tensors(21, 10, 3);
        let mdp = mdp.with_gamma(0.8).unwrap();
        let mrp = induce_mrp(&mdp, &pol).unwrap();
        let v = true_value(&mrp).unwrap();
        // Σ_{t≤200} γ^t P^t r
        let mut term = mrp.expected_reward.clone();
        let mut total = term.clone();
        for _ in 1..=200 {
            term = mrp.kernel.mul_vec(&term).scaled(mrp.gamma);
            total = total.add(&term);
        }
        assert!(v.sub(&total).norm_inf() <= 1e-6);
        let bellman = mrp.expected_reward.add(&mrp.kernel.mul_vec(&v).scaled(mrp.gamma));
        assert!(v.sub(&bellman).norm_inf() <= 1e-8);
    }

    #[test]
    fn periodic_chain_needs_damping() {
        let k = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(stationary_distribution(&k, None, None), Err(EnvError::NonConvergence(1_000_000)));
        let mu = stationary_distribution(&k, None, Some(DEFAULT_DAMPING)).unwrap();
        assert_abs_diff_eq!(mu[0], 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(mu[1], 0.5, epsilon = 1e-10);
    }

    #[test]
    fn doubly_stochastic_kernel_is_uniform() {
        let k = DenseMatrix::from_rows(&[vec![0.5, 0.3, 0.2], vec![0.2, 0.5, 0.3], vec![0.3, 0.2, 0.5]]);
        let mu = stationary_distribution(&k, None, None).unwrap();
        for x in mu.iter() {
            assert_abs_diff_eq!(*x, 1.0 / 3.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn stationary_matches_matrix_power_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let k = DenseMatrix::from_rows(&random_stochastic(&mut rng, 8, 8));
        let mu = stationary_distribution(&k, None, None).unwrap();
        // P^(2^10) by repeated squaring; every row approximates μ.
        let mut pow = k.clone();
        for _ in 0..10 {
            pow = pow.matmul(&pow);
        }
        for j in 0..8 {
            assert_abs_diff_eq!(pow[(0, j)], mu[j], epsilon = 1e-10);
        }
        let fixed = k.transpose().mul_vec(&mu);
        assert!(fixed.sub(&mu).norm_inf() < 1e-11);
    }

    #[test]
    fn restart_chain_has_unit_mass_on_gridworld() {
        let mdp = build_gridworld(4, 4, &[5, 7, 11, 12], 15, 0.2, 0.95).unwrap();
        let pol = value_iteration(&mdp, 1e-10);
        let mrp = induce_mrp(&mdp, &pol).unwrap();
        let r = Restart { terminal: mdp.terminal_mask(), start: 0 };
        let mu = stationary_distribution(&mrp.kernel, Some(r), Some(DEFAULT_DAMPING)).unwrap();
        assert_abs_diff_eq!(mu.iter().sum::<f64>(), 1.0, epsilon = 1e-10);
        assert!(mu.iter().all(|x| *x >= 0.0));
        let obs = observation_distribution(&mdp, &pol).unwrap();
        assert!(obs[0] > 0.0);
        for s in [5, 7, 11, 12, 15] {
            assert_eq!(obs[s], 0.0);
        }
    }

    #[test]
    fn td_system_on_two_state_chain() {
        let (mdp, pol) = two_state_chain(0.5);
        let phi = FeatureMap::one_hot(2);
        let (a, b) = expected_lsa_system(&mdp, &pol, &pol, &phi, LsaMode::Td).unwrap();
        let expected = DenseMatrix::from_rows(&[vec![0.5, -0.25], vec![-0.25, 0.5]]);
        assert!(a.max_abs_diff(&expected) < 1e-12, "{a:?}");
        assert_abs_diff_eq!(b[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(b[1], 0.0, epsilon = 1e-12);
        let theta = solve_linear(&a, &b).unwrap();
        assert_abs_diff_eq!(theta[0], 4.0 / 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(theta[1], 2.0 / 3.0, epsilon = 1e-10);
    }

    #[test]
    fn tabular_td_fixed_point_is_true_value() {
        for seed in 0..5 {
            let (mdp, pol) = random_mdp_tensors(100 + seed, 7, 3);
            let phi = FeatureMap::one_hot(7);
            let (a, b) = expected_lsa_system(&mdp, &pol, &pol, &phi, LsaMode::Td).unwrap();
            let theta = solve_linear(&a, &b).unwrap();
            let v = true_value(&induce_mrp(&mdp, &pol).unwrap()).unwrap();
            assert!(theta.sub(&v).norm_inf() <= 1e-8);
        }
    }

    #[test]
    fn tabular_td_fixed_point_on_gridworld_support() {
        // Unvisited states have zero rows in Ā; compare on the visited support.
        let mdp = build_gridworld(4, 4, &[5, 7, 11, 12], 15, 0.2, 0.9).unwrap();
        let pol = value_iteration(&mdp, 1e-12);
        let phi = FeatureMap::one_hot(16);
        let (a, b) = expected_lsa_system(&mdp, &pol, &pol, &phi, LsaMode::Td).unwrap();
        let mu = observation_distribution(&mdp, &pol).unwrap();
        let support: Vec<usize> = (0..16).filter(|s| mu[*s] > 1e-14).collect();
        let sub_b = DenseVector::new(support.iter().map(|s| b[*s]).collect());
        let theta = solve_linear(&a.principal_submatrix(&support), &sub_b).unwrap();
        let v = true_value(&induce_mrp(&mdp, &pol).unwrap()).unwrap();
        for (k, s) in support.iter().enumerate() {
            assert_abs_diff_eq!(theta[k], v[*s], epsilon = 1e-8);
        }
    }

    #[test]
    fn gtd_scalar_system() {
        // d = 1, φ ≡ 1: the θ-block solves aθ = β and y = 0.
        let (mdp, pol) = two_state_chain(0.5);
        let phi = FeatureMap::from_table(DenseMatrix::from_rows(&[vec![1.0], vec![1.0]])).unwrap();
        let (a, b) = expected_lsa_system(&mdp, &pol, &pol, &phi, LsaMode::Gtd(GtdVariant::Neu)).unwrap();
        let scalar_a = a[(1, 0)];
        let beta = b[1];
        assert_eq!(a[(0, 1)], -scalar_a);
        assert_eq!(a[(1, 1)], 1.0);
        let sol = solve_linear(&a, &b).unwrap();
        assert_abs_diff_eq!(sol[0], beta / scalar_a, epsilon = 1e-12);
        assert_abs_diff_eq!(sol[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn gtd_recovers_linear_value_off_policy() {
        let built = build_random_mdp(15, 4, 4, 0.9, 9).unwrap();
        let behavior = crate::env::epsilon_greedy(&built.target, 0.2);
        for variant in [GtdVariant::Neu, GtdVariant::Mspbe] {
            let (a, b) =
                expected_lsa_system(&built.mdp, &built.target, &behavior, &built.features, LsaMode::Gtd(variant))
                    .unwrap();
            let sol = solve_linear(&a, &b).unwrap();
            for k in 0..4 {
                assert_abs_diff_eq!(sol[k], built.theta_true[k], epsilon = 1e-8);
                assert_abs_diff_eq!(sol[4 + k], 0.0, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn expected_system_rejects_bad_inputs() {
        let (mdp, pol) = random_mdp_tensors(1, 3, 2);
        let other = Policy::uniform(3, 2);
        let phi = FeatureMap::one_hot(3);
        assert_eq!(expected_lsa_system(&mdp, &other, &pol, &phi, LsaMode::Td), Err(EnvError::OffPolicyTd));
        let target = Policy::deterministic(&[0, 0, 0], 2).unwrap();
        let behavior = Policy::deterministic(&[1, 1, 1], 2).unwrap();
        assert!(matches!(
            expected_lsa_system(&mdp, &target, &behavior, &phi, LsaMode::Gtd(GtdVariant::Neu)),
            Err(EnvError::ZeroBehaviorProbability { state: 0, action: 0 })
        ));
    }
}
