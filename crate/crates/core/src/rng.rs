//! Seeded random streams.
//!
//! Every stochastic operation takes an explicit `u64` seed and builds a
//! ChaCha stream from it, so results are stable across platforms and
//! thread schedules. Sub-seeds are derived with a stable FNV-1a hash
//! followed by a SplitMix64 finalizer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(mut hash: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable seed for `(master, iteration, key)`. Adding or renaming other
/// keys never changes the value for an existing triple.
pub fn derive_seed(master: u64, iteration: u64, key: &str) -> u64 {
    let mut h = fnv1a(FNV_OFFSET, &master.to_le_bytes());
    h = fnv1a(h, &iteration.to_le_bytes());
    h = fnv1a(h, key.as_bytes());
    splitmix(h)
}

/// Child seed for a named sub-step inside an already-derived stream.
pub fn child_seed(seed: u64, key: &str) -> u64 {
    splitmix(fnv1a(fnv1a(FNV_OFFSET, &seed.to_le_bytes()), key.as_bytes()))
}
