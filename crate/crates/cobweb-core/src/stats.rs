//! Single-pass Gaussian statistics for continuous attributes.

use serde::{Deserialize, Serialize};

/// Running mean and sum of squared deviations, updated one value at a
/// time (Welford's algorithm). `m2` is the sum of squared deviations
/// from the running mean, so the population variance is `m2 / n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianStat {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Default for GaussianStat {
    fn default() -> Self {
        GaussianStat {
            n: 0,
            mean: 0.0,
            m2: 0.0,
        }
    }
}

impl GaussianStat {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuild from serialized parts; `m2` is reconstructed as `std² · n`.
    pub fn from_parts(n: u64, mean: f64, std: f64) -> Self {
        GaussianStat {
            n,
            mean,
            m2: std * std * n as f64,
        }
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Exact pooling of two streams (Chan et al. parallel update).
    pub fn merged(&self, other: &GaussianStat) -> GaussianStat {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64;
        GaussianStat { n, mean, m2 }
    }

    /// The stat after one more observation, without mutating.
    pub fn with_value(&self, x: f64) -> GaussianStat {
        let mut s = *self;
        s.push(x);
        s
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.mean
        }
    }

    /// Population standard deviation, 0 for n ≤ 1.
    pub fn std(&self) -> f64 {
        if self.n <= 1 {
            0.0
        } else {
            (self.m2 / self.n as f64).sqrt()
        }
    }

    pub fn m2(&self) -> f64 {
        self.m2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Two-pass batch oracle: independent of the streaming path.
    fn batch_mean_std(values: &[f64]) -> (f64, f64) {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        (mean, var.sqrt())
    }

    #[test]
    fn two_point_update() {
        let mut s = GaussianStat::new();
        s.push(2.0);
        assert_eq!(s.n(), 1);
        assert_eq!(s.mean(), 2.0);
        assert_eq!(s.m2(), 0.0);
        s.push(4.0);
        assert_eq!(s.n(), 2);
        assert_eq!(s.mean(), 3.0);
        assert_eq!(s.m2(), 2.0);
    }

    #[test]
    fn std_zero_for_small_n() {
        let mut s = GaussianStat::new();
        assert_eq!(s.std(), 0.0);
        s.push(7.5);
        assert_eq!(s.std(), 0.0);
    }

    #[test]
    fn streaming_matches_batch_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let values: Vec<f64> = (0..1000).map(|_| rng.random_range(-50.0..50.0)).collect();
        let mut s = GaussianStat::new();
        for &v in &values {
            s.push(v);
        }
        let (mean, std) = batch_mean_std(&values);
        assert!((s.mean() - mean).abs() <= 1e-9 * mean.abs().max(1.0));
        assert!((s.std() - std).abs() <= 1e-9 * std.abs().max(1.0));
        assert!(s.m2() >= 0.0);
    }

    #[test]
    fn merged_matches_batch_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a: Vec<f64> = (0..317).map(|_| rng.random_range(-3.0..9.0)).collect();
        let b: Vec<f64> = (0..513).map(|_| rng.random_range(-3.0..9.0)).collect();
        let mut sa = GaussianStat::new();
        let mut sb = GaussianStat::new();
        for &v in &a {
            sa.push(v);
        }
        for &v in &b {
            sb.push(v);
        }
        let pooled = sa.merged(&sb);
        let all: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
        let (mean, std) = batch_mean_std(&all);
        assert_eq!(pooled.n(), 830);
        assert!((pooled.mean() - mean).abs() <= 1e-9 * mean.abs().max(1.0));
        assert!((pooled.std() - std).abs() <= 1e-9 * std.abs().max(1.0));
    }

    #[test]
    fn identical_values_keep_m2_exactly_zero() {
        let mut s = GaussianStat::new();
        for _ in 0..100 {
            s.push(0.123456789);
        }
        assert_eq!(s.m2(), 0.0);
        assert_eq!(s.mean(), 0.123456789);
    }

    #[test]
    fn from_parts_round_trips_std() {
        let mut s = GaussianStat::new();
        for v in [1.0, 2.0, 4.0, 8.0] {
            s.push(v);
        }
        let rebuilt = GaussianStat::from_parts(s.n(), s.mean(), s.std());
        assert_eq!(rebuilt.std(), s.std());
        assert_eq!(rebuilt.mean(), s.mean());
    }
}
