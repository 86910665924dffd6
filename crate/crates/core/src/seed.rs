//! Named random streams derived from one root seed.
//!
//! Each pipeline component draws from its own ChaCha stream whose seed is a
//! hash of the root seed and a label, so adding draws in one component never
//! shifts the numbers seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedLineage {
    pub root: u64,
    /// Labels applied in order, outermost first.
    pub path: Vec<String>,
}

impl SeedLineage {
    pub fn root(root: u64) -> Self {
        SeedLineage { root, path: Vec::new() }
    }

    pub fn child(&self, label: &str) -> Self {
        let mut path = self.path.clone();
        path.push(label.to_string());
        SeedLineage { root: self.root, path }
    }

    pub fn seed(&self) -> u64 {
        let mut h = Sha256::new();
        h.update(self.root.to_le_bytes());
        for p in &self.path {
            h.update((p.len() as u64).to_le_bytes());
            h.update(p.as_bytes());
        }
        let d = h.finalize();
        u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
    }

    pub fn rng(&self) -> Rng {
        ChaCha8Rng::seed_from_u64(self.seed())
    }
}
