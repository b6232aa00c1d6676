//! Seeded randomness.
//!
//! Every stochastic routine takes an explicit `u64` seed and builds a
//! xoshiro256++ stream from it, so results are identical across platforms.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type Rng = Xoshiro256PlusPlus;

pub fn rng(seed: u64) -> Rng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a over bytes; stable across Rust releases unlike `DefaultHasher`.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Derive an independent stream seed from a parent seed and a list of keys.
pub fn derive_seed(seed: u64, keys: &[u64]) -> u64 {
    keys.iter().fold(mix64(seed), |acc, &k| mix64(acc ^ mix64(k)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn streams_are_reproducible() {
        let a: Vec<u64> = (0..4)
            .map({
                let mut r = rng(7);
                move |_| r.next_u64()
            })
            .collect();
        let mut r = rng(7);
        let b: Vec<u64> = (0..4).map(|_| r.next_u64()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn derived_seeds_differ_by_key() {
        let s = 42;
        assert_ne!(derive_seed(s, &[1, 2]), derive_seed(s, &[2, 1]));
        assert_eq!(derive_seed(s, &[1, 2]), derive_seed(s, &[1, 2]));
    }

    #[test]
    fn fnv_reference_value() {
        // FNV-1a 64 of "a"
        assert_eq!(fnv1a(b"a"), 0xaf63_dc4c_8601_ec8c);
    }
}
