//! Seed derivation for independent random substreams.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a list of indices (path index, attempt, ...) into a
/// new seed. Distinct index lists give statistically unrelated seeds.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p.wrapping_add(GOLDEN))))
}

/// Generator for driver coordinate `coord` of the path identified by `seed`.
/// Each coordinate reads its own ChaCha stream, so adding coordinates never
/// perturbs existing ones.
pub fn coordinate_rng(seed: u64, coord: usize) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(coord as u64);
    rng
}
