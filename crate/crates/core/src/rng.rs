//! Seedable RNG streams.
//!
//! Every stream is a ChaCha8 generator keyed by the run seed, with the
//! 64-bit stream id set to `(block << 40) | index`. Streams with distinct
//! ids never overlap, so a block's draws depend only on the seed, the block
//! tag and the series (or state row, replication, refit) index.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Block tags used in stream derivation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Block {
    Mixing = 1,
    Volatility = 2,
    CovStates = 3,
    Skewness = 4,
    Sparsity = 5,
    SvHyper = 6,
    CovHyper = 7,
    Simulate = 8,
    Forecast = 9,
    Prior = 10,
    Geweke = 11,
}

pub fn stream(seed: u64, block: Block, index: u64) -> StreamRng {
    debug_assert!(index < (1 << 40));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((block as u64) << 40) | index);
    rng
}

/// Child seed for independent jobs (refits, replications, univariate fits).
pub fn derive_seed(master: u64, tag: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64((tag << 32) ^ index ^ 0x9e37_79b9_7f4a_7c15))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream(7, Block::Mixing, 0).random();
        let b: u64 = stream(7, Block::Mixing, 0).random();
        let c: u64 = stream(7, Block::Mixing, 1).random();
        let d: u64 = stream(7, Block::Volatility, 0).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn derived_seeds_differ_by_index() {
        assert_ne!(derive_seed(1, 0, 0), derive_seed(1, 0, 1));
        assert_ne!(derive_seed(1, 0, 0), derive_seed(1, 1, 0));
        assert_eq!(derive_seed(3, 2, 1), derive_seed(3, 2, 1));
    }
}
