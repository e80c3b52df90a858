//! Reproducible random streams.
//!
//! Every random object in the crate is driven by a [`SeedSpec`]. The
//! generator is ChaCha8: the 256-bit key is expanded from `base_seed` with
//! SplitMix64 and `replica_index` selects the ChaCha stream, so distinct
//! replicas of one base seed never share a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// The concrete generator behind every [`SeedSpec`].
pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub base_seed: u64,
    pub replica_index: u64,
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SeedSpec {
    pub const fn new(base_seed: u64, replica_index: u64) -> Self {
        Self {
            base_seed,
            replica_index,
        }
    }

    /// The generator for this (base seed, replica) pair.
    pub fn rng(&self) -> SimRng {
        let mut state = self.base_seed;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = SimRng::from_seed(key);
        rng.set_stream(self.replica_index);
        rng
    }

    /// Same replica, different purpose: a stream keyed by `(base_seed, salt)`.
    ///
    /// Used to give e.g. leaf-path sampling its own stream that does not
    /// overlap the stream that grew the tree.
    pub fn derive(&self, salt: u64) -> Self {
        let mut salt_state = salt;
        let mut state = self.base_seed ^ splitmix64(&mut salt_state);
        Self {
            base_seed: splitmix64(&mut state),
            replica_index: self.replica_index,
        }
    }

    /// Replica `index` of the same base seed.
    pub fn replica(&self, index: u64) -> Self {
        Self {
            base_seed: self.base_seed,
            replica_index: index,
        }
    }
}
