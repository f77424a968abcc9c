use rand::distr::{Distribution, Uniform};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Law of the multiplier weights `W`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    /// Uniform on `(1 − √3, 1 + √3)`: mean 1, variance 1.
    #[default]
    UniformMv1,
    /// Uniform on `(1 − 1/√3, 1 + 1/√3)`: mean 1, variance 1/9.
    UniformNarrow,
    /// `0` or `2` with equal probability: mean 1, variance 1.
    TwoPoint,
    /// `W ≡ 1`. Every replicate then reproduces the unperturbed iterate.
    Unit,
}

impl WeightKind {
    /// Support `(lo, hi)` of the weight.
    pub fn bounds(self) -> (f64, f64) {
        match self {
            WeightKind::UniformMv1 => (1.0 - SQRT3, 1.0 + SQRT3),
            WeightKind::UniformNarrow => (1.0 - 1.0 / SQRT3, 1.0 + 1.0 / SQRT3),
            WeightKind::TwoPoint => (0.0, 2.0),
            WeightKind::Unit => (1.0, 1.0),
        }
    }

    /// `W_max = max(|lo|, |hi|)`.
    pub fn w_max(self) -> f64 {
        let (lo, hi) = self.bounds();
        lo.abs().max(hi.abs())
    }

    pub fn mean(self) -> f64 {
        1.0
    }

    pub fn variance(self) -> f64 {
        match self {
            WeightKind::UniformMv1 | WeightKind::TwoPoint => 1.0,
            WeightKind::UniformNarrow => 1.0 / 9.0,
            WeightKind::Unit => 0.0,
        }
    }
}

/// Draws i.i.d. weights from one RNG stream.
#[derive(Debug, Clone)]
pub struct WeightSampler {
    kind: WeightKind,
    uniform: Option<Uniform<f64>>,
    rng: ChaCha8Rng,
}

impl WeightSampler {
    pub fn new(kind: WeightKind, rng: ChaCha8Rng) -> Self {
        let uniform = match kind {
            WeightKind::UniformMv1 | WeightKind::UniformNarrow => {
                let (lo, hi) = kind.bounds();
                Some(Uniform::new(lo, hi).expect("bounds are ordered and finite"))
            }
            _ => None,
        };
        Self { kind, uniform, rng }
    }

    /// Sampler for stream `stream` of the weight domain under `seed`.
    pub fn from_seed(kind: WeightKind, seed: u64, stream: u64) -> Self {
        Self::new(kind, crate::rng::derived_rng(seed, crate::rng::DOMAIN_WEIGHTS, stream))
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    #[inline]
    pub fn sample(&mut self) -> f64 {
        match self.kind {
            WeightKind::Unit => 1.0,
            WeightKind::TwoPoint => {
                if self.rng.random::<bool>() {
                    2.0
                } else {
                    0.0
                }
            }
            _ => self.uniform.as_ref().expect("uniform kinds carry a distribution").sample(&mut self.rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(kind: WeightKind, n: usize) -> (f64, f64) {
        let mut s = WeightSampler::from_seed(kind, 11, 0);
        let xs: Vec<f64> = (0..n).map(|_| s.sample()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (mean, var)
    }

    #[test]
    fn unit_variance_kinds() {
        for kind in [WeightKind::UniformMv1, WeightKind::TwoPoint] {
            let (m, v) = moments(kind, 1_000_000);
            assert!((m - 1.0).abs() < 0.01, "{kind:?} mean {m}");
            assert!((v - 1.0).abs() < 0.01, "{kind:?} var {v}");
        }
        // Uniform(a, b) has variance (b − a)² / 12.
        let (lo, hi) = WeightKind::UniformMv1.bounds();
        assert!(((hi - lo).powi(2) / 12.0 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn narrow_kind_has_variance_one_ninth() {
        let (m, v) = moments(WeightKind::UniformNarrow, 200_000);
        assert!((m - 1.0).abs() < 0.01);
        assert!((v - 1.0 / 9.0).abs() < 0.005);
    }

    #[test]
    fn support_and_bounds() {
        let mut s = WeightSampler::from_seed(WeightKind::TwoPoint, 3, 4);
        assert!((0..10_000).all(|_| matches!(s.sample(), x if x == 0.0 || x == 2.0)));
        let mut s = WeightSampler::from_seed(WeightKind::UniformMv1, 3, 4);
        let w_max = WeightKind::UniformMv1.w_max();
        assert!((0..10_000).all(|_| s.sample().abs() < w_max));
        assert_eq!(WeightKind::TwoPoint.w_max(), 2.0);
    }

    #[test]
    fn seeded_sequences_repeat() {
        for kind in [WeightKind::UniformMv1, WeightKind::TwoPoint] {
            let mut a = WeightSampler::from_seed(kind, 9, 2);
            let mut b = WeightSampler::from_seed(kind, 9, 2);
            let mut c = WeightSampler::from_seed(kind, 9, 3);
            let xa: Vec<f64> = (0..100).map(|_| a.sample()).collect();
            let xb: Vec<f64> = (0..100).map(|_| b.sample()).collect();
            let xc: Vec<f64> = (0..100).map(|_| c.sample()).collect();
            assert_eq!(xa, xb);
            assert_ne!(xa, xc);
        }
    }
}
