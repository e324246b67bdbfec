//! Seed derivation and counter-based random draws.
//!
//! Per-slot processes (PR activity, PR data generation) are drawn from a pure
//! function of `(seed, stream, a, b)` rather than a sequential generator, so
//! any slot can be replayed without advancing state.

/// Stream tag for PR on/off activity.
pub const STREAM_ACTIVITY: u64 = 0x5052_4143_5449_5645;
/// Stream tag for PR data generation.
pub const STREAM_DATA: u64 = 0x5052_4441_5441_4745;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform draw in `[0, 1)` from `splitmix64(splitmix64(splitmix64(seed ^ stream) ^ a) ^ b)`,
/// keeping the top 53 bits.
#[inline]
pub fn counter_uniform(seed: u64, stream: u64, a: u64, b: u64) -> f64 {
    let h = splitmix64(splitmix64(splitmix64(seed ^ stream) ^ a) ^ b);
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Seed of replication `r` under master seed `master`:
/// `splitmix64(master ^ splitmix64(r))`.
pub fn replication_seed(master: u64, replication: u64) -> u64 {
    splitmix64(master ^ splitmix64(replication))
}

/// Seed of an independent sub-stream (deployment, protocol choices) of one run.
pub fn substream(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ tag.wrapping_mul(GOLDEN))
}
