//! Shared fixtures for the scoring benchmarks.

use postpred::rng::RngStream;

/// Random mixture components of size `m`, deterministic in the seed.
pub fn mixture_components(m: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = RngStream::new(seed, &[0]);
    (0..m)
        .map(|_| (rng.normal(0.0, 2.0), 0.2 + rng.uniform() * 1.8))
        .collect()
}

/// Random sample of size `m`, deterministic in the seed.
pub fn gaussian_sample(m: usize, seed: u64) -> Vec<f64> {
    let mut rng = RngStream::new(seed, &[1]);
    (0..m).map(|_| rng.normal(0.0, 2.0)).collect()
}
