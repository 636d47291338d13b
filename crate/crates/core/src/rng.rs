//! Deterministic randomness helpers.
//!
//! Rate encoding needs a *counter-based* generator: the spike decision for
//! (seed, step, neuron) must be computable independently of every other
//! decision, so encodings are reproducible under any evaluation order and
//! any worker count. A SplitMix64-style finalizer over a keyed counter gives
//! exactly that. Everything else that needs a stream of randomness (weight
//! init, attack noise, synthetic data) uses ChaCha seeded through these
//! helpers so independent purposes never share a stream.

/// SplitMix64 finalizer: avalanches a 64-bit state into a well-mixed output.
#[inline]
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a seed with two key words into an independent 64-bit value.
///
/// Used both as a counter-based generator (seed, t, n) and to derive
/// sub-seeds for distinct purposes from one user-facing seed.
#[inline]
pub fn keyed_u64(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = splitmix64(seed ^ 0xA076_1D64_78BD_642F);
    z = splitmix64(z ^ a.wrapping_mul(0xE703_7ED1_A0B4_28DB));
    splitmix64(z ^ b.wrapping_mul(0x8EBC_6AF0_9C88_C6E3))
}

/// Uniform draw in [0, 1) from the counter (seed, a, b).
#[inline]
pub fn keyed_unit(seed: u64, a: u64, b: u64) -> f64 {
    // 53 high-quality bits -> [0, 1) with the usual 2^-53 grid.
    (keyed_u64(seed, a, b) >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
}

/// FNV-1a over a byte slice; used to fingerprint datasets for cache keys.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Incremental FNV-1a hasher for larger structures.
#[derive(Debug, Clone)]
pub struct Fingerprint(u64);

impl Fingerprint {
    pub fn new() -> Self {
        Fingerprint(0xCBF2_9CE4_8422_2325)
    }

    pub fn push_bytes(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01B3);
        }
    }

    pub fn push_u64(&mut self, v: u64) {
        self.push_bytes(&v.to_le_bytes());
    }

    pub fn push_f64(&mut self, v: f64) {
        self.push_bytes(&v.to_bits().to_le_bytes());
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

impl Default for Fingerprint {
    fn default() -> Self {
        Self::new()
    }
}
