//! Reproducible random streams.
//!
//! Every Monte Carlo path owns its own [`RngStream`], keyed by a global seed and
//! the path index. The underlying generator is ChaCha8 with the stream index
//! mapped onto the cipher's stream word, so streams with distinct indices never
//! overlap and results do not depend on how paths are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        Self { seed, stream_index }
    }

    /// Instantiates the generator positioned at the start of this stream.
    pub fn generator(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_index);
        rng
    }

    /// A seed for an unrelated experiment arm, derived deterministically.
    pub fn derive_seed(seed: u64, salt: u64) -> u64 {
        splitmix64(seed ^ splitmix64(salt.wrapping_add(0x9E37_79B9_7F4A_7C15)))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
