use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derive an independent, reproducible stream from a base seed and a tuple
/// of stream identifiers (frame index, object index, ...).
pub(crate) fn stream(seed: u64, ids: &[u64]) -> ChaCha8Rng {
    let mut h = seed ^ 0x51_7c_c1_b7_27_22_0a_95;
    for &id in ids {
        h = splitmix(h ^ splitmix(id.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    ChaCha8Rng::seed_from_u64(h)
}

/// Numeric frame ids map to themselves; anything else is hashed.
pub(crate) fn frame_key(frame_id: &str) -> u64 {
    frame_id.parse::<u64>().unwrap_or_else(|_| {
        // FNV-1a
        frame_id
            .bytes()
            .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
    })
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
