//! Seed derivation and timing helpers.

use std::time::Instant;

/// Derives an independent seed for replicate `index` from a base seed.
///
/// SplitMix64 finalizer over the pair, so consecutive replicate indices give
/// decorrelated streams and the mapping is stable across platforms.
pub fn replicate_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `f` and returns its output together with the elapsed wall time in
/// milliseconds.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64() * 1e3)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_differ_across_replicates() {
        let s: Vec<u64> = (0..100).map(|r| replicate_seed(7, r)).collect();
        let mut dedup = s.clone();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(dedup.len(), s.len());
    }

    #[test]
    fn seed_derivation_is_stable() {
        // Frozen so sweep outputs stay reproducible across releases.
        assert_eq!(replicate_seed(0, 0), 16294208416658607535);
        assert_eq!(replicate_seed(42, 3), replicate_seed(42, 3));
    }
}
