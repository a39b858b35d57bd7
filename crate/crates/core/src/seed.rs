//! Seed derivation for the independent random streams used by training and
//! data preparation.
//!
//! Every stream is a ChaCha8 generator whose 32-byte key is four consecutive
//! SplitMix64 outputs starting from a derived 64-bit seed. A derived seed is
//!
//! ```text
//! derive_seed(master, stream, index) = mix(mix(master ^ mix(stream)) ^ mix(index + GOLDEN))
//! ```
//!
//! where `mix` is the SplitMix64 finalizer. Both constructions are fixed and
//! platform independent, so a given `(master, stream, index)` always produces
//! the same sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic generator type used for every random stream in the crate.
pub type StreamRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Stream tags. Iteration `i` of training uses `derive_seed(master, FEATURES, i)`.
pub mod stream {
    pub const FEATURES: u64 = 1;
    pub const TRIPLETS: u64 = 2;
    pub const SPLIT: u64 = 3;
    pub const SYNTH: u64 = 4;
    pub const FOLDS: u64 = 5;
    pub const REPEAT: u64 = 6;
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    mix(*state)
}

pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    mix(mix(master ^ mix(stream)) ^ mix(index.wrapping_add(GOLDEN)))
}

/// Seed of the frequency block sampled at training iteration `iteration` (1-based).
pub fn iteration_seed(master: u64, iteration: usize) -> u64 {
    derive_seed(master, stream::FEATURES, iteration as u64)
}

pub fn stream_rng(seed: u64) -> StreamRng {
    let mut state = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
