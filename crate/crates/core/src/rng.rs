//! Seed derivation. Every random stream in the crate is a ChaCha8 generator
//! keyed by `(seed, domain)` and selected by a stream index, so results do not
//! depend on the order in which independent streams are consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DOMAIN_TRAJECTORY: u64 = 1;
pub const DOMAIN_WEIGHTS: u64 = 2;
pub const DOMAIN_OFFLINE: u64 = 3;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn derived_rng(seed: u64, domain: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ splitmix64(domain));
    rng.set_stream(stream);
    rng
}
