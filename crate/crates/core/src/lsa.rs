//! Linear stochastic approximation with polynomially decaying steps and
//! Polyak-Ruppert averaging.
//!
//! The update is `θ ← θ + α_t (b̃ − Ã θ)`. The running average is kept as
//! per-coordinate partial sums that are only flushed when a coordinate
//! changes, so a step costs time proportional to the number of coordinates
//! the observation touches rather than the full dimension.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::featurize::LsaObservation;
use crate::numerics::DenseVector;

/// Default norm guard used by the experiment harness.
pub const DEFAULT_NORM_GUARD: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LsaError {
    #[error("iterate became non-finite at step {t} (coordinate {coord})")]
    NonFinite { t: u64, coord: usize },
    #[error("iterate norm {norm:e} exceeded the guard {limit:e} at step {t}")]
    NormGuard { t: u64, norm: f64, limit: f64 },
    #[error("invalid step schedule: {0}")]
    InvalidSchedule(String),
    #[error("observation has dimension {obs}, iterate has dimension {state}")]
    DimensionMismatch { obs: usize, state: usize },
}

/// `α_t = α₀ / t^η`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    alpha0: f64,
    eta: f64,
}

impl StepSchedule {
    pub fn new(alpha0: f64, eta: f64) -> Result<Self, LsaError> {
        if !(alpha0 > 0.0 && alpha0.is_finite()) {
            return Err(LsaError::InvalidSchedule(format!("alpha0 = {alpha0} must be positive")));
        }
        if !(eta > 0.5 && eta < 1.0) {
            return Err(LsaError::InvalidSchedule(format!("eta = {eta} must lie in (0.5, 1)")));
        }
        Ok(Self { alpha0, eta })
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Step size for the `t`-th update, `t ≥ 1`.
    pub fn step_size(&self, t: u64) -> f64 {
        assert!(t >= 1, "step index starts at 1");
        self.alpha0 / (t as f64).powf(self.eta)
    }
}

impl Default for StepSchedule {
    fn default() -> Self {
        Self { alpha0: 0.5, eta: 0.75 }
    }
}

/// Iterate `θ_t` and its running average `θ̄_t = (θ₁ + … + θ_t) / t`.
#[derive(Debug, Clone, PartialEq)]
pub struct LsaState {
    t: u64,
    theta: Vec<f64>,
    // Σ_{k ≤ last[i]} θ_k[i]; coordinate i has been constant since step last[i].
    partial_sum: Vec<f64>,
    last: Vec<u64>,
    scratch: Vec<f64>,
}

impl LsaState {
    pub fn new(theta0: DenseVector) -> Self {
        let d = theta0.dim();
        Self { t: 0, theta: theta0.into_vec(), partial_sum: vec![0.0; d], last: vec![0; d], scratch: Vec::new() }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::new(DenseVector::zeros(dim))
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// `θ̄_t`; before the first step this is `θ₀`.
    pub fn theta_bar(&self) -> DenseVector {
        DenseVector::new((0..self.dim()).map(|i| self.theta_bar_at(i)).collect())
    }

    /// One coordinate of `θ̄_t`.
    pub fn theta_bar_at(&self, i: usize) -> f64 {
        if self.t == 0 {
            return self.theta[i];
        }
        let tail = self.theta[i] * (self.t - self.last[i]) as f64;
        (self.partial_sum[i] + tail) / self.t as f64
    }

    /// `c·θ̄_t` without materializing `θ̄_t`.
    pub fn functional_of_bar(&self, c: &[f64]) -> f64 {
        c.iter().enumerate().filter(|(_, ci)| **ci != 0.0).map(|(i, ci)| ci * self.theta_bar_at(i)).sum()
    }

    /// `θ ← θ + alpha (b̃ − Ã θ)`, then the average absorbs the new iterate.
    pub fn step(&mut self, obs: &LsaObservation, alpha: f64) -> Result<(), LsaError> {
        if obs.dim() != self.dim() {
            return Err(LsaError::DimensionMismatch { obs: obs.dim(), state: self.dim() });
        }
        let t = self.t;
        let (theta, sum, last) = (&self.theta, &mut self.partial_sum, &mut self.last);
        obs.for_each_touched(|i| {
            sum[i] += theta[i] * (t - last[i]) as f64;
            last[i] = t;
        });
        obs.apply_update(&mut self.theta, alpha, &mut self.scratch);
        self.t += 1;
        let mut bad = None;
        obs.for_each_touched(|i| {
            if bad.is_none() && !self.theta[i].is_finite() {
                bad = Some(i);
            }
        });
        match bad {
            Some(coord) => Err(LsaError::NonFinite { t: self.t, coord }),
            None => Ok(()),
        }
    }

    /// Fails when `‖θ_t‖₂` exceeds `limit`.
    pub fn check_norm(&self, limit: f64) -> Result<(), LsaError> {
        let norm = crate::numerics::dot(&self.theta, &self.theta).sqrt();
        if norm > limit || !norm.is_finite() {
            return Err(LsaError::NormGuard { t: self.t, norm, limit });
        }
        Ok(())
    }
}

/// Runs a fresh iterate from `θ₀ = 0` over a finite observation sequence and
/// returns `θ̄`. This is the estimator the offline bootstrap resamples.
pub fn run_lsa<'a>(
    dim: usize,
    schedule: &StepSchedule,
    observations: impl IntoIterator<Item = &'a LsaObservation>,
) -> Result<DenseVector, LsaError> {
    let mut state = LsaState::zeros(dim);
    for obs in observations {
        let alpha = schedule.step_size(state.t() + 1);
        state.step(obs, alpha)?;
    }
    Ok(state.theta_bar())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{solve_linear, DenseMatrix};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn two_state_system() -> (DenseMatrix, DenseVector) {
        // On-policy TD for the alternating chain, γ = 0.5, one-hot features.
        let a = DenseMatrix::from_rows(&[vec![0.5, -0.25], vec![-0.25, 0.5]]);
        (a, DenseVector::new(vec![0.5, 0.0]))
    }

    #[test]
    fn step_sizes() {
        let s = StepSchedule::new(1.0, 0.75).unwrap();
        assert_eq!(s.step_size(1), 1.0);
        assert_abs_diff_eq!(s.step_size(16), 0.125, epsilon = 1e-15);
        let s = StepSchedule::new(0.5, 0.6).unwrap();
        let oracle = 0.5 * (-0.6 * 32f64.ln()).exp();
        assert_abs_diff_eq!(s.step_size(32), oracle, epsilon = 1e-12);
        assert!(StepSchedule::new(1.0, 0.5).is_err());
        assert!(StepSchedule::new(1.0, 1.0).is_err());
        assert!(StepSchedule::new(0.0, 0.75).is_err());
    }

    #[test]
    fn scalar_contraction() {
        let obs = LsaObservation::dense(DenseMatrix::from_rows(&[vec![1.0]]), DenseVector::new(vec![0.0]));
        let mut st = LsaState::new(DenseVector::new(vec![1.0]));
        st.step(&obs, 0.5).unwrap();
        assert_eq!(st.theta(), &[0.5]);
        assert_eq!(st.theta_bar().as_slice(), &[0.5]);
    }

    #[test]
    fn fixed_point_is_invariant() {
        let (a, b) = two_state_system();
        let star = solve_linear(&a, &b).unwrap();
        let obs = LsaObservation::dense(a, b);
        let mut st = LsaState::new(star.clone());
        st.step(&obs, 0.3).unwrap();
        for (x, y) in st.theta().iter().zip(star.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-15);
        }
    }

    #[test]
    fn deterministic_two_state_converges() {
        let (a, b) = two_state_system();
        let star = solve_linear(&a, &b).unwrap();
        assert_abs_diff_eq!(star[0], 4.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(star[1], 2.0 / 3.0, epsilon = 1e-12);
        let obs = LsaObservation::dense(a.clone(), b.clone());
        let sched = StepSchedule::new(0.5, 0.75).unwrap();

        // Plain loop with an explicit history sum.
        let (mut th, mut sum) = ([0.0f64; 2], [0.0f64; 2]);
        for t in 1..=10_000u64 {
            let alpha = 0.5 / (t as f64).powf(0.75);
            let r = [b[0] - a[(0, 0)] * th[0] - a[(0, 1)] * th[1], b[1] - a[(1, 0)] * th[0] - a[(1, 1)] * th[1]];
            th = [th[0] + alpha * r[0], th[1] + alpha * r[1]];
            sum = [sum[0] + th[0], sum[1] + th[1]];
        }
        let bar = run_lsa(2, &sched, std::iter::repeat_n(&obs, 10_000)).unwrap();
        assert_abs_diff_eq!(bar[0], sum[0] / 1e4, epsilon = 1e-10);
        assert_abs_diff_eq!(bar[1], sum[1] / 1e4, epsilon = 1e-10);
        // The start-up transient still weighs about 0.06 at 1e4 steps.
        assert!(bar.sub(&star).norm2() < 0.065);
        let bar = run_lsa(2, &sched, std::iter::repeat_n(&obs, 20_000)).unwrap();
        assert!(bar.sub(&star).norm2() < 0.05);
    }

    #[test]
    fn divergence_is_reported() {
        let obs = LsaObservation::dense(DenseMatrix::from_rows(&[vec![-1.0]]), DenseVector::new(vec![0.0]));
        let mut st = LsaState::new(DenseVector::new(vec![1.0]));
        let mut err = None;
        for _ in 0..2000 {
            if let Err(e) = st.step(&obs, 1.0) {
                err = Some(e);
                break;
            }
        }
        assert!(matches!(err, Some(LsaError::NonFinite { coord: 0, .. })));
        let mut st = LsaState::new(DenseVector::new(vec![1.0]));
        for _ in 0..30 {
            st.step(&obs, 1.0).unwrap();
        }
        assert!(matches!(st.check_norm(DEFAULT_NORM_GUARD), Err(LsaError::NormGuard { .. })));
    }

    #[test]
    fn step_decreases() {
        let s = StepSchedule::default();
        for t in 1..1000 {
            assert!(s.step_size(t + 1) < s.step_size(t));
        }
    }

    fn observation_strategy(d: usize) -> impl Strategy<Value = Vec<(Vec<f64>, Vec<f64>)>> {
        prop::collection::vec(
            (prop::collection::vec(-1.0f64..1.0, d * d), prop::collection::vec(-1.0f64..1.0, d)),
            1..200,
        )
    }

    proptest! {
        #[test]
        fn average_equals_mean_of_history(obs in observation_strategy(3), sparse in any::<bool>()) {
            let mut st = LsaState::zeros(3);
            let mut history: Vec<Vec<f64>> = Vec::new();
            let sched = StepSchedule::new(0.2, 0.7).unwrap();
            for (a, b) in &obs {
                let mut a = a.clone();
                if sparse {
                    // Zero out a row and column so some coordinates sit still.
                    for k in 0..3 { a[3 + k] = 0.0; a[k * 3 + 1] = 0.0; }
                }
                let mut b = b.clone();
                if sparse { b[1] = 0.0; }
                let o = LsaObservation::dense(DenseMatrix::from_row_major(3, 3, a).unwrap(), DenseVector::new(b));
                st.step(&o, sched.step_size(st.t() + 1)).unwrap();
                history.push(st.theta().to_vec());
                let n = history.len() as f64;
                let bar = st.theta_bar();
                for i in 0..3 {
                    let mean = history.iter().map(|h| h[i]).sum::<f64>() / n;
                    prop_assert!((bar[i] - mean).abs() < 1e-10);
                }
            }
        }

        #[test]
        fn fixed_point_invariance(a in prop::collection::vec(-1.0f64..1.0, 9), b in prop::collection::vec(-1.0f64..1.0, 3), alpha in 0.01f64..1.0) {
            let mut a = a;
            for i in 0..3 { a[i * 3 + i] += 4.0; }
            let a = DenseMatrix::from_row_major(3, 3, a).unwrap();
            let b = DenseVector::new(b);
            let star = solve_linear(&a, &b).unwrap();
            let mut st = LsaState::new(star.clone());
            st.step(&LsaObservation::dense(a, b), alpha).unwrap();
            for (x, y) in st.theta().iter().zip(star.iter()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
