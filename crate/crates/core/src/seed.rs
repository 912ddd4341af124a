//! Seed contract.
//!
//! Every random draw in the crate comes from a ChaCha8 stream obtained by
//! [`stream`]: the 64-bit seed selects the key, the stream id selects an
//! independent keystream. Tasks that run in parallel (restarts, Monte Carlo
//! replications) each own one stream id, so results do not depend on the
//! number of worker threads or on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn stream(seed: u64, stream_id: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Derive a child seed (splitmix64 finalizer over `seed ^ index`-mixing).
pub fn derive(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
