//! Counter-based per-episode random streams.
//!
//! Every episode gets independent streams keyed by `(seed, episode)` and
//! split by role, so results do not depend on scheduling and different agent
//! variants see the same environment randomness for the same episode index.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Environment = 0,
    Agent = 1,
    Suggester = 2,
    Delivery = 3,
}

pub fn stream_rng(seed: u64, episode: u64, stream: Stream) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&episode.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream as u64);
    rng
}

/// Seed for the `index`-th scenario of a sweep.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let a: u64 = stream_rng(7, 3, Stream::Agent).gen();
        let b: u64 = stream_rng(7, 3, Stream::Agent).gen();
        let c: u64 = stream_rng(7, 3, Stream::Environment).gen();
        let d: u64 = stream_rng(7, 4, Stream::Agent).gen();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
    }
}
