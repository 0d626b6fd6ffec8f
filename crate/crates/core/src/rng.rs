//! Seeded, splittable random streams.
//!
//! Every chain owns a ChaCha8 stream keyed by `(root seed, stream index)`, so
//! adding or removing chains never perturbs the draws of the others.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as SamplerRng;

/// Stream reserved for synthetic data generation.
pub const DATA_STREAM: u64 = u64::MAX;
/// Stream reserved for reference (exact) posterior draws.
pub const REFERENCE_STREAM: u64 = u64::MAX - 1;
/// Stream reserved for step-size pilot runs.
pub const PILOT_STREAM: u64 = u64::MAX - 2;

/// Returns the generator for stream `index` under `root`.
pub fn stream(root: u64, index: u64) -> SamplerRng {
    let mut rng = SamplerRng::seed_from_u64(root);
    rng.set_stream(index);
    rng
}

/// Seed for a derived experiment component (e.g. one d in a sweep) so that
/// sub-experiments do not share streams.
pub fn derive_seed(root: u64, salt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = root ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
