//! Counter-based random streams.
//!
//! Every random draw in a run comes from a stream keyed by
//! `(run seed, domain, a, b)`, e.g. `(seed, BATCH, device, t)`. Streams are
//! independent of evaluation order, so results do not depend on how work is
//! scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains. Distinct tags keep e.g. batch draws and partition shuffles
/// from ever sharing a key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Batch = 0x6261_7463,
    Epoch = 0x6570_6f63,
    Noise = 0x6e6f_6973,
    Init = 0x696e_6974,
    Data = 0x6461_7461,
    Partition = 0x7061_7274,
    Graph = 0x6772_6170,
    Layout = 0x6c61_796f,
    Probe = 0x7072_6f62,
}

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn stream_key(seed: u64, domain: Domain, a: u64, b: u64) -> u64 {
    let mut h = mix64(seed ^ (domain as u64).rotate_left(17));
    h = mix64(h ^ a);
    mix64(h ^ b.rotate_left(32))
}

pub fn stream(seed: u64, domain: Domain, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_key(seed, domain, a, b))
}
