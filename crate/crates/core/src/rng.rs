//! Seeded random streams.
//!
//! Every random object in the crate is drawn from ChaCha8, a counter-based
//! generator. A `(seed, stream)` pair names an independent substream, so a
//! column-parallel sketch can give column `j` its own stream `j` and still
//! produce the same output regardless of scheduling.
//!
//! Seeds for repeated draws (one embedding per trial, one per resketch) are
//! derived with [`derive_seed`], a SplitMix64 finalizer over `(seed, index)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Generator for substream `stream` of `seed`.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Deterministic child seed; distinct indices give unrelated seeds.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Partial Fisher-Yates: `k` distinct indices drawn uniformly from `0..n`.
pub fn sample_without_replacement(rng: &mut Rng, n: usize, k: usize) -> Vec<usize> {
    use rand::Rng as _;
    debug_assert!(k <= n);
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}
