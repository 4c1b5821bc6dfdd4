//! Seed derivation for reproducible parallel-safe RNG streams.
//!
//! Every stochastic routine takes an explicit RNG. Chains, replicates and
//! scoring paths each own an independent stream derived from a root seed, so
//! results do not depend on scheduling order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The RNG type used throughout the crate.
pub type Rng = ChaCha8Rng;

/// Derive an independent stream from a root seed and a stream label.
///
/// Uses splitmix64 finalisation over (root, label) so that nearby labels give
/// unrelated seeds.
pub fn derive(root: u64, label: u64) -> Rng {
    let mut x = root ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^= x >> 31;
    let mut rng = ChaCha8Rng::seed_from_u64(x);
    rng.set_stream(label);
    rng
}

/// Derive a stream from a root seed and a textual label.
pub fn derive_named(root: u64, label: &str) -> Rng {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    derive(root, h)
}
