use serde::{Deserialize, Serialize};

use super::{BootstrapEnsemble, BootstrapError};
use crate::featurize::FeatureMap;
use crate::numerics::{quantile_of_sorted, std_normal_quantile, DenseVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    Quantile,
    Se,
}

impl CiMethod {
    pub const ALL: [CiMethod; 2] = [CiMethod::Quantile, CiMethod::Se];

    pub fn as_str(self) -> &'static str {
        match self {
            CiMethod::Quantile => "quantile",
            CiMethod::Se => "se",
        }
    }
}

impl std::fmt::Display for CiMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub method: CiMethod,
}

impl ConfidenceInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

fn check_level(level: f64) -> Result<(), BootstrapError> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(BootstrapError::InvalidLevel(level))
    }
}

/// `(center + q_{α/2}, center + q_{1−α/2})` over the empirical law of
/// `deltas`, for `α ∈ [0, 1]`.
pub fn quantile_interval(center: f64, deltas: &[f64], alpha: f64) -> Result<(f64, f64), BootstrapError> {
    if deltas.is_empty() {
        return Err(BootstrapError::InsufficientReplicates(0));
    }
    let mut sorted = deltas.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok((center + quantile_of_sorted(&sorted, alpha / 2.0), center + quantile_of_sorted(&sorted, 1.0 - alpha / 2.0)))
}

/// Quantile interval for the scalar `center = cᵀθ̄` given the replicate
/// values `cᵀθ̄̂ᵇ`.
pub fn quantile_ci_from_values(center: f64, values: &[f64], level: f64) -> Result<ConfidenceInterval, BootstrapError> {
    check_level(level)?;
    if values.len() < 2 {
        return Err(BootstrapError::InsufficientReplicates(values.len()));
    }
    let deltas: Vec<f64> = values.iter().map(|v| v - center).collect();
    let (lower, upper) = quantile_interval(center, &deltas, 1.0 - level)?;
    Ok(ConfidenceInterval { lower, upper, level, method: CiMethod::Quantile })
}

/// `center ± z_{1−α/2}·s` where `s²` is the sample variance of the replicate
/// values, i.e. `cᵀΣ̂c` for the replicate covariance `Σ̂`.
pub fn se_ci_from_values(center: f64, values: &[f64], level: f64) -> Result<ConfidenceInterval, BootstrapError> {
    check_level(level)?;
    let n = values.len();
    if n < 2 {
        return Err(BootstrapError::InsufficientReplicates(n));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    let half = std_normal_quantile(1.0 - (1.0 - level) / 2.0)? * var.sqrt();
    Ok(ConfidenceInterval { lower: center - half, upper: center + half, level, method: CiMethod::Se })
}

pub fn quantile_ci(
    theta_bar: &DenseVector,
    ens: &BootstrapEnsemble,
    level: f64,
    c: &[f64],
) -> Result<ConfidenceInterval, BootstrapError> {
    check_functional(c, theta_bar.dim())?;
    quantile_ci_from_values(crate::numerics::dot(c, theta_bar.as_slice()), &ens.functional_values(c), level)
}

pub fn se_ci(
    theta_bar: &DenseVector,
    ens: &BootstrapEnsemble,
    level: f64,
    c: &[f64],
) -> Result<ConfidenceInterval, BootstrapError> {
    check_functional(c, theta_bar.dim())?;
    se_ci_from_values(crate::numerics::dot(c, theta_bar.as_slice()), &ens.functional_values(c), level)
}

fn check_functional(c: &[f64], dim: usize) -> Result<(), BootstrapError> {
    if c.len() != dim {
        return Err(BootstrapError::InvalidFunctional(format!("length {} for iterate dimension {dim}", c.len())));
    }
    Ok(())
}

/// `c = Σ_s ν(s) φ(s)`, so that `cᵀθ` is the value estimate averaged over `ν`.
pub fn value_functional(features: &FeatureMap, nu: &[f64]) -> Result<DenseVector, BootstrapError> {
    if nu.len() != features.n_states() {
        return Err(BootstrapError::InvalidFunctional(format!(
            "reference distribution has {} entries for {} states",
            nu.len(),
            features.n_states()
        )));
    }
    if nu.iter().any(|p| *p < 0.0 || !p.is_finite()) || (nu.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(BootstrapError::InvalidFunctional("reference distribution must be a probability vector".into()));
    }
    let table = features.table();
    let mut c = vec![0.0; features.dim()];
    for (s, p) in nu.iter().enumerate().filter(|(_, p)| **p != 0.0) {
        for (ck, phi) in c.iter_mut().zip(table.row(s)) {
            *ck += p * phi;
        }
    }
    Ok(DenseVector::new(c))
}

/// Extends a feature-space functional with zeros to the iterate dimension;
/// for GTD this reads off the `θ` block and ignores the auxiliary block.
pub fn pad_functional(c: &DenseVector, iterate_dim: usize) -> Vec<f64> {
    assert!(iterate_dim >= c.dim(), "functional longer than the iterate");
    let mut out = c.as_slice().to_vec();
    out.resize(iterate_dim, 0.0);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::sample_covariance;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn degenerate_values_give_zero_width() {
        let v = [2.5; 10];
        let q = quantile_ci_from_values(2.5, &v, 0.95).unwrap();
        let s = se_ci_from_values(2.5, &v, 0.95).unwrap();
        for ci in [q, s] {
            assert_eq!((ci.lower, ci.upper), (2.5, 2.5));
        }
    }

    #[test]
    fn extreme_quantiles() {
        let (lo, hi) = quantile_interval(3.0, &[-1.0, 0.0, 1.0], 0.0).unwrap();
        assert_eq!((lo, hi), (2.0, 4.0));
        // The least extreme admissible level collapses to the median.
        let (lo, hi) = quantile_interval(3.0, &[-1.0, 0.0, 1.0], 1.0).unwrap();
        assert_eq!((lo, hi), (3.0, 3.0));
    }

    #[test]
    fn quantile_endpoints_match_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let center = 0.7;
        let values: Vec<f64> = (0..200).map(|_| center + rng.sample::<f64, _>(StandardNormal)).collect();
        let ci = quantile_ci_from_values(center, &values, 0.95).unwrap();
        let mut d: Vec<f64> = values.iter().map(|v| v - center).collect();
        // Insertion sort, then linear interpolation at position (n − 1)·δ.
        for i in 1..d.len() {
            let mut j = i;
            while j > 0 && d[j - 1] > d[j] {
                d.swap(j - 1, j);
                j -= 1;
            }
        }
        let q = |delta: f64| {
            let pos = delta * 199.0;
            let k = pos.floor() as usize;
            d[k] + (pos - k as f64) * (d[(k + 1).min(199)] - d[k])
        };
        assert_eq!(ci.lower, center + q(0.025));
        assert_eq!(ci.upper, center + q(0.975));
    }

    #[test]
    fn se_half_width_two_points() {
        let ci = se_ci_from_values(0.0, &[-1.0, 1.0], 0.95).unwrap();
        assert_abs_diff_eq!(ci.upper, 1.959963984540054 * 2f64.sqrt(), epsilon = 1e-8);
        assert_abs_diff_eq!(ci.lower, -ci.upper, epsilon = 1e-12);
    }

    #[test]
    fn se_matches_covariance_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let reps: Vec<DenseVector> =
            (0..50).map(|_| DenseVector::new((0..3).map(|_| rng.random::<f64>()).collect())).collect();
        let c = [0.2, -1.0, 0.5];
        let sigma = sample_covariance(&reps).unwrap();
        let cov_form = DenseVector::new(c.to_vec()).dot(&sigma.mul_vec(&DenseVector::new(c.to_vec())));
        let values: Vec<f64> = reps.iter().map(|r| crate::numerics::dot(&c, r.as_slice())).collect();
        let ci = se_ci_from_values(0.0, &values, 0.9).unwrap();
        let z = std_normal_quantile(0.95).unwrap();
        assert_abs_diff_eq!(ci.upper, z * cov_form.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn preconditions() {
        assert_eq!(quantile_ci_from_values(0.0, &[1.0], 0.9), Err(BootstrapError::InsufficientReplicates(1)));
        assert_eq!(se_ci_from_values(0.0, &[1.0, 2.0], 1.0), Err(BootstrapError::InvalidLevel(1.0)));
        assert_eq!(se_ci_from_values(0.0, &[1.0, 2.0], 0.0), Err(BootstrapError::InvalidLevel(0.0)));
    }

    #[test]
    fn value_functionals() {
        let oh = FeatureMap::one_hot(2);
        assert_eq!(value_functional(&oh, &[0.5, 0.5]).unwrap().as_slice(), &[0.5, 0.5]);
        let phi = FeatureMap::random(6, 3, 1).unwrap();
        assert_eq!(value_functional(&phi, &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0]).unwrap().as_slice(), phi.table().row(2));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w: Vec<f64> = (0..6).map(|_| rng.random::<f64>()).collect();
        let nu: Vec<f64> = w.iter().map(|x| x / w.iter().sum::<f64>()).collect();
        let c = value_functional(&phi, &nu).unwrap();
        for k in 0..3 {
            let mut brute = 0.0;
            for s in 0..6 {
                brute += nu[s] * phi.table()[(s, k)];
            }
            assert_abs_diff_eq!(c[k], brute, epsilon = 1e-14);
        }
        assert!(value_functional(&phi, &[0.5; 6]).is_err());
        assert_eq!(pad_functional(&c, 6)[3..], [0.0; 3]);
    }

    proptest! {
        #[test]
        fn quantile_intervals_nest(values in prop::collection::vec(-10.0f64..10.0, 2..100), l1 in 0.01f64..0.98, gap in 0.0f64..0.99) {
            let l2 = (l1 + gap * (0.99 - l1)).min(0.99);
            let a = quantile_ci_from_values(0.3, &values, l1).unwrap();
            let b = quantile_ci_from_values(0.3, &values, l2).unwrap();
            prop_assert!(b.lower <= a.lower && a.upper <= b.upper);
            prop_assert!(a.lower <= a.upper);
        }

        #[test]
        fn se_interval_is_symmetric(values in prop::collection::vec(-10.0f64..10.0, 2..100), center in -5.0f64..5.0, level in 0.01f64..0.99) {
            let ci = se_ci_from_values(center, &values, level).unwrap();
            prop_assert!(((ci.upper - center) - (center - ci.lower)).abs() <= 1e-12);
        }
    }
}
