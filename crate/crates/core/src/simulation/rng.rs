//! Keyed random streams.
//!
//! Every stage of every frame draws from its own ChaCha20 stream. The
//! 256-bit key is `SHA-256("dtofkit-stream-v1" || seed_le || frame_le || stage)`,
//! so a stage's randomness does not depend on which other stages ran or in
//! what order. Uniform doubles take the top 53 bits of each `u64` output.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

const DOMAIN: &[u8] = b"dtofkit-stream-v1";

/// Seed plus frame index identifying one simulated frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SimSeed {
    pub seed: u64,
    pub frame: u64,
}

impl SimSeed {
    pub fn new(seed: u64) -> Self {
        Self { seed, frame: 0 }
    }

    pub fn with_frame(seed: u64, frame: u64) -> Self {
        Self { seed, frame }
    }

    pub fn stream(&self, stage: &str) -> StageRng {
        StageRng::new(self.seed, self.frame, stage)
    }
}

pub struct StageRng {
    inner: ChaCha20Rng,
}

impl StageRng {
    pub fn new(seed: u64, frame: u64, stage: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(DOMAIN);
        hasher.update(seed.to_le_bytes());
        hasher.update(frame.to_le_bytes());
        hasher.update(stage.as_bytes());
        let digest = hasher.finalize();
        let mut key = [0u8; 32];
        key.copy_from_slice(&digest);
        Self {
            inner: ChaCha20Rng::from_seed(key),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`; returns `lo` when the interval is empty.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        let u = self.uniform();
        if hi > lo {
            lo + (hi - lo) * u
        } else {
            lo
        }
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}
