//! Deterministic inputs shared by the benchmarks.

use banditnet::swap::PairDistribution;

/// Values spread over a few perturbation scales, no randomness needed.
pub fn spread_values(m: usize) -> Vec<f64> {
    (0..m).map(|i| ((i * 7919) % 101) as f64 / 25.0).collect()
}

/// Pair weights concentrated on a few pairs, the slow case for power
/// iteration.
pub fn peaked_pairs(n: usize) -> PairDistribution {
    let pairs = n * (n - 1);
    let weights: Vec<f64> = (0..pairs)
        .map(|k| if k % (n + 1) == 0 { 1.0 } else { 1e-6 * (k as f64 + 1.0) })
        .collect();
    let total: f64 = weights.iter().sum();
    PairDistribution::from_weights(n, weights.iter().map(|w| w / total).collect()).expect("valid weights")
}

pub fn flat_pairs(n: usize) -> PairDistribution {
    PairDistribution::uniform(n).expect("at least two actions")
}
