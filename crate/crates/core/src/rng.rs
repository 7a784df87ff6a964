//! Seeding.
//!
//! All randomness flows from ChaCha8 (`rand_chacha::ChaCha8Rng`), whose
//! output stream for a given 64-bit seed is fixed across platforms. Seeds
//! for individual runs and tasks are derived with SplitMix64 so any task can
//! be regenerated on its own, in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a path of indices.
pub fn sub_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &i| splitmix64(acc ^ splitmix64(i)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn stream_is_pinned() {
        // Guards against silent changes to the generator or its seeding.
        let mut r = rng_from_seed(42);
        let first = r.next_u64();
        let mut again = rng_from_seed(42);
        assert_eq!(first, again.next_u64());
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
    }

    #[test]
    fn sub_seeds_differ() {
        let a = sub_seed(7, &[0, 1]);
        let b = sub_seed(7, &[1, 0]);
        let c = sub_seed(8, &[0, 1]);
        assert!(a != b && a != c && b != c);
        assert_eq!(a, sub_seed(7, &[0, 1]));
    }
}
