//! Named, seeded random streams.
//!
//! Every consumer of randomness derives its own stream from the scenario seed
//! and a label path (`"deploy"`, `"clouds" / t`, ...). A stream's key is the
//! SHA-256 of the seed and the path, which seeds a ChaCha8 generator, so the
//! draws of one concern never depend on how many values another concern used
//! or on the order in which worker threads run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    key: [u8; 32],
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"anchorite/root");
        h.update(seed.to_le_bytes());
        Self { key: h.finalize().into() }
    }

    /// Independent child stream for `label`.
    pub fn derive(&self, label: &str) -> Self {
        let mut h = Sha256::new();
        h.update(self.key);
        h.update((label.len() as u64).to_le_bytes());
        h.update(label.as_bytes());
        Self { key: h.finalize().into() }
    }

    /// Independent child stream for `(label, index)`, e.g. one per time step.
    pub fn derive_indexed(&self, label: &str, index: u64) -> Self {
        let mut h = Sha256::new();
        h.update(self.key);
        h.update((label.len() as u64).to_le_bytes());
        h.update(label.as_bytes());
        h.update(index.to_le_bytes());
        Self { key: h.finalize().into() }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.key)
    }
}
