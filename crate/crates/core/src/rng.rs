use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derives an independent 64-bit seed for substream `index` of `seed`
/// (two rounds of the SplitMix64 finalizer).
pub fn substream(seed: u64, index: u64) -> u64 {
    mix(mix(seed) ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
