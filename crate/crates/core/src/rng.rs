//! Deterministic counter-based random number generation.
//!
//! Every stochastic step in this crate derives its randomness from a
//! [`KeyedRng`]: a splitmix64 counter stream whose state is an absorbed hash
//! of a run seed plus a structured key (item id, day, user, ...). Two
//! consequences matter for correctness:
//!
//! * the uniform assigned to an entity depends only on `(seed, key)`, never
//!   on iteration order or partitioning, so reservoir merges and parallel
//!   splits are exactly reproducible;
//! * distinct subsystems use distinct stream tags, so e.g. sampling draws
//!   never collide with simulation draws for the same item.

use rand::RngCore;

/// Stream tags for domain separation between subsystems.
pub mod stream {
    pub const RESERVOIR: u64 = 0x5245_5356;
    pub const LABEL: u64 = 0x4c41_4245;
    pub const SCORE: u64 = 0x5343_4f52;
    pub const ARM: u64 = 0x4152_4d41;
    pub const IMPRESSION_COUNT: u64 = 0x434f_554e;
    pub const IMPRESSION_ITEM: u64 = 0x4954_454d;
    pub const BUCKET_DRAW: u64 = 0x5053_5441;
    pub const SIMULATE: u64 = 0x5349_4d55;
}

/// FNV-1a hash of a byte string; used to fold identifiers into RNG keys.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-based RNG keyed by `(seed, key parts)`.
#[derive(Debug, Clone)]
pub struct KeyedRng {
    state: u64,
    counter: u64,
}

impl KeyedRng {
    pub fn new(seed: u64, key: &[u64]) -> Self {
        let mut state = splitmix64(seed ^ 0x6a09_e667_f3bc_c908);
        for &part in key {
            state = splitmix64(state ^ splitmix64(part));
        }
        KeyedRng { state, counter: 0 }
    }

    #[inline]
    fn step(&mut self) -> u64 {
        let out = splitmix64(self.state.wrapping_add(
            self.counter.wrapping_mul(0x9e37_79b9_7f4a_7c15),
        ));
        self.counter = self.counter.wrapping_add(1);
        out
    }

    /// One raw 64-bit draw; handy for deriving sub-stream seeds.
    #[inline]
    pub fn next_word(&mut self) -> u64 {
        self.step()
    }

    /// Uniform draw strictly inside (0, 1), 53-bit resolution.
    #[inline]
    pub fn open01(&mut self) -> f64 {
        (((self.step() >> 11) as f64) + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Unbiased-enough integer in `[0, n)` via widening multiply.
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.step() as u128 * n as u128) >> 64) as usize
    }

    /// Standard normal draw via the Box-Muller transform.
    pub fn normal(&mut self) -> f64 {
        let u1 = self.open01();
        let u2 = self.open01();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

impl RngCore for KeyedRng {
    fn next_u32(&mut self) -> u32 {
        (self.step() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.step()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.step().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}
