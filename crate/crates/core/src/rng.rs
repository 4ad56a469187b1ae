//! Seeded, splittable random streams.
//!
//! Every logical stream is addressed by `(master seed, label, index)`. The
//! seed and label select a ChaCha key, the index selects the ChaCha stream
//! (nonce), so blocks of Monte Carlo trials or training epochs can be drawn
//! in any order, or concurrently, and still reproduce bit-for-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// FNV-1a, used only to turn stream labels into key material.
fn label_hash(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325_u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed; used where a seed must be recorded in a manifest.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    splitmix64(seed ^ splitmix64(label_hash(label)))
}

pub fn stream(seed: u64, label: &str) -> Stream {
    substream(seed, label, 0)
}

pub fn substream(seed: u64, label: &str, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, label));
    rng.set_stream(index);
    rng
}
