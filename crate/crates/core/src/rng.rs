//! Seed derivation. Every stochastic component draws from its own ChaCha
//! stream so that, for a fixed master seed, changing one component (say the
//! STDP distributions) leaves the wiring and the input identical.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Named sub-streams of a master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    Neurons = 1,
    Synapses = 2,
    Wiring = 3,
    Weights = 4,
    Input = 5,
    Encoding = 6,
    Readout = 7,
    Search = 8,
    Hawkes = 9,
    HawkesKernels = 10,
    Data = 11,
    Split = 12,
}

/// Rng for `stream` derived from `seed`.
pub fn stream_rng(seed: u64, stream: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Rng for sub-index `index` of `stream`, e.g. one per replicate.
pub fn indexed_rng(seed: u64, stream: Stream, index: u64) -> Rng {
    let mixed = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    let mut rng = ChaCha8Rng::seed_from_u64(mixed);
    rng.set_stream(stream as u64);
    rng
}

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
