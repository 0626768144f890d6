//! Counter-based 64-bit mixing generator.
//!
//! `mix(seed, index)` is a pure function, so every stream is random-access and
//! parallel evaluation reproduces serial evaluation bit for bit.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// SplitMix64 finalizer applied to a hashed seed plus a Weyl step per index.
#[inline]
pub fn mix(seed: u64, index: u64) -> u64 {
    finalize(finalize(seed).wrapping_add(GOLDEN.wrapping_mul(index.wrapping_add(1))))
}

/// Fair coin: the top bit of `mix(seed, index)`.
#[inline]
pub fn coin(seed: u64, index: u64) -> bool {
    mix(seed, index) >> 63 == 1
}

/// Uniform in `[0, 1)` with 53 random bits.
#[inline]
pub fn uniform(seed: u64, index: u64) -> f64 {
    (mix(seed, index) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
