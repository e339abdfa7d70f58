//! Deterministic seeded RNG streams.
//!
//! Every source of randomness in a run is a ChaCha8 stream derived from the
//! master seed plus a purpose tag and optional indices (client id, round,
//! epoch). Streams never depend on execution order, so results are identical
//! no matter how work is scheduled across threads.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags for derived streams. Each distinct consumer of randomness
/// gets its own tag so streams never collide across subsystems.
pub mod tags {
    pub const DATASET: u64 = 0x01;
    pub const PARTITION: u64 = 0x02;
    pub const INIT: u64 = 0x03;
    pub const SHUFFLE: u64 = 0x04;
    pub const PARTICIPATION: u64 = 0x05;
}

/// SplitMix64 step; used only to mix seeds, never as the stream generator.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a master seed with a list of tag/index values into one stream seed.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    let mut state = splitmix64(master ^ 0xD6E8_FEB8_6659_FD93);
    for &p in parts {
        state = splitmix64(state ^ p.wrapping_mul(0xA24B_AED4_963E_E407));
    }
    state
}

/// Deterministic ChaCha8 stream for `(master, parts)`.
pub fn stream(master: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, parts))
}
