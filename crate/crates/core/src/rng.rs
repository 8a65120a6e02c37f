//! Seeded random streams.
//!
//! Every consumer of randomness asks for a stream by `(seed, purpose)`, so that
//! adding a new random draw in one place never shifts the numbers seen elsewhere,
//! and parallel workers can each own an independent stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// What a random stream is used for. The discriminant selects the ChaCha stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    ModelInit = 1,
    Noise = 2,
    Mask = 3,
    Corpus = 4,
    Shuffle = 5,
    GradCheck = 6,
    Autoencoder = 7,
}

/// Stream for `(seed, purpose)`, optionally sub-indexed (e.g. per item or per trial).
pub fn stream(seed: u64, purpose: Purpose, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 48) | (index & 0xFFFF_FFFF_FFFF));
    rng
}
