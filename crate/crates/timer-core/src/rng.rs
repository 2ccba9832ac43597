//! Seeded randomness helpers shared by the sampling, judging, and synthesis
//! paths. All draws go through these functions so outputs depend only on the
//! ChaCha stream, not on distribution internals that could shift between
//! library versions.

use rand_core::RngCore;

/// Unbiased uniform index in `0..n` via rejection sampling. `n` must be > 0.
pub(crate) fn gen_index(rng: &mut impl RngCore, n: usize) -> usize {
    debug_assert!(n > 0);
    let n = n as u64;
    // accept only below the largest multiple of n to avoid modulo bias
    let reject_from = u64::MAX - (u64::MAX % n + 1) % n;
    loop {
        let v = rng.next_u64();
        if v <= reject_from {
            return (v % n) as usize;
        }
    }
}

/// Uniform draw from `[0, 1)` with 53 bits of precision.
pub(crate) fn gen_unit(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform integer in the inclusive range `[lo, hi]`.
pub(crate) fn gen_range_inclusive(rng: &mut impl RngCore, lo: usize, hi: usize) -> usize {
    debug_assert!(lo <= hi);
    lo + gen_index(rng, hi - lo + 1)
}

/// In-place Fisher-Yates shuffle.
pub(crate) fn shuffle<T>(rng: &mut impl RngCore, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = gen_index(rng, i + 1);
        items.swap(i, j);
    }
}

/// Draws `k` distinct indices from `0..n`, returned in draw order.
/// Partial Fisher-Yates over an index table.
pub(crate) fn sample_indices(rng: &mut impl RngCore, n: usize, k: usize) -> Vec<usize> {
    debug_assert!(k <= n);
    let mut table: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + gen_index(rng, n - i);
        table.swap(i, j);
    }
    table.truncate(k);
    table
}
