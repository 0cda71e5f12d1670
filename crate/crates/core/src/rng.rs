//! Seeded, splittable random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream addressed by a
//! `(seed, stream)` pair. Sub-streams for grid points, chains or particle
//! filter evaluations are derived by folding integer keys into the stream id,
//! so results do not depend on scheduling order or on the platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type ChainRng = ChaCha8Rng;

/// Stream `stream` of the generator seeded by `seed`.
pub fn stream(seed: u64, stream: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A stream addressed by an arbitrary key path, e.g. `[grid_row, grid_col]`.
pub fn keyed(seed: u64, keys: &[u64]) -> ChainRng {
    let id = keys
        .iter()
        .fold(0x6a09_e667_f3bc_c909_u64, |acc, &k| splitmix(acc ^ splitmix(k)));
    stream(seed, id)
}

/// Key for a real-valued grid coordinate (bit pattern, so `1.0` and `1.0`
/// always map to the same stream).
pub fn float_key(x: f64) -> u64 {
    x.to_bits()
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
