//! Seed derivation.
//!
//! Every random stream in a run is a ChaCha8 generator keyed by the run seed
//! plus a short tuple of stream coordinates (purpose, round, client). Streams
//! never share state, so a participant's local training is reproducible no
//! matter which other participants were selected alongside it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream purposes. Kept distinct so that e.g. selection in round 3 and
/// shuffling for client 3 never collide.
#[derive(Clone, Copy, Debug)]
#[repr(u64)]
pub enum Stream {
    Population = 1,
    Split = 2,
    ModelInit = 3,
    Selection = 4,
    LocalShuffle = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, stream: Stream, coords: &[u64]) -> u64 {
    let mut h = splitmix64(seed ^ splitmix64(stream as u64));
    for &c in coords {
        h = splitmix64(h ^ c);
    }
    h
}

pub fn stream_rng(seed: u64, stream: Stream, coords: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream, coords))
}
