//! Seeded percentile bootstrap for confidence intervals.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Percentile bootstrap of the mean: resample `values` with replacement
/// `resamples` times, take the mean of each resample, and return the
/// ((1−level)/2, 1−(1−level)/2) empirical quantiles of those means.
/// Deterministic for a given seed.
pub fn bootstrap_ci(values: &[f64], resamples: usize, level: f64, seed: u64) -> (f64, f64) {
    assert!(!values.is_empty(), "bootstrap requires at least one value");
    assert!(resamples >= 1, "need at least one resample");
    assert!(level > 0.0 && level < 1.0, "level must be in (0, 1)");
    let mut rng = rng_for(seed);
    let n = values.len();
    // Summing deviations from a fixed base keeps constant data exact:
    // every deviation is 0.0, so the mean comes back as the constant.
    let base = values[0];
    let mut means = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut dev_sum = 0.0;
        for _ in 0..n {
            dev_sum += values[rng.random_range(0..n)] - base;
        }
        means.push(base + dev_sum / n as f64);
    }
    means.sort_by(|a, b| a.total_cmp(b));
    let alpha = 1.0 - level;
    (
        quantile(&means, alpha / 2.0),
        quantile(&means, 1.0 - alpha / 2.0),
    )
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..17].copy_from_slice(b"bootstrap");
    ChaCha8Rng::from_seed(key)
}

/// Linear-interpolation empirical quantile over a sorted slice.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let last = sorted.len() - 1;
    let pos = q * last as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi.min(last)] - sorted[lo]) * frac
}
