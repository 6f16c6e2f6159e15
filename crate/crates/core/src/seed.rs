//! Counter-based seed derivation.
//!
//! Replicate `k` of a Monte-Carlo run draws from a stream keyed by
//! `mix(root ^ mix(k))`, so the sample set depends only on the root seed and
//! never on the order in which replicates are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed {
    pub root: u64,
}

impl Seed {
    pub const fn new(root: u64) -> Self {
        Seed { root }
    }

    /// Child seed for stream `k`.
    pub fn derive(self, k: u64) -> Seed {
        let key = mix(k.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA));
        Seed {
            root: mix(self.root ^ key),
        }
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.root)
    }
}

impl From<u64> for Seed {
    fn from(root: u64) -> Self {
        Seed::new(root)
    }
}
