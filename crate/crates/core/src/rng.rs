//! Deterministic, splittable seed derivation.
//!
//! A [`SeedTree`] names a position in a tree of random streams. Children are
//! derived with a SplitMix64 finalizer over `(parent, index)`, so a task's
//! stream depends only on its path from the root and never on the order in
//! which tasks are scheduled. Leaves are turned into ChaCha8 generators with
//! `seed_from_u64`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// The generator type used by every sampler.
pub type Stream = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedTree {
    seed: u64,
}

impl SeedTree {
    pub fn new(root: u64) -> Self {
        Self { seed: root }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child stream number `index`.
    pub fn child(&self, index: u64) -> Self {
        let salted = mix64(index.wrapping_add(0x9E37_79B9_7F4A_7C15));
        Self {
            seed: mix64(self.seed ^ salted.rotate_left(17)),
        }
    }

    /// Child stream named by a label (FNV-1a hashed).
    pub fn named(&self, label: &str) -> Self {
        self.child(fnv1a64(label.as_bytes()))
    }

    pub fn stream(&self) -> Stream {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

/// Size of the fixed work chunks used by batch samplers. Chunk `i` always
/// draws from `seeds.child(i)`, which keeps batch output independent of the
/// thread count.
pub const CHUNK: usize = 4096;
