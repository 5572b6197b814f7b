//! Named random substreams derived from one master seed.
//!
//! Each substream is seeded from `SHA-256(master_seed || label)`, so the
//! draws in one stream never depend on how many draws another stream made
//! or in which order streams were opened.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha20Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedTree {
    master: u64,
}

impl SeedTree {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn stream(&self, label: &str) -> StreamRng {
        let mut h = Sha256::new();
        h.update(self.master.to_le_bytes());
        h.update(label.as_bytes());
        let seed: [u8; 32] = h.finalize().into();
        StreamRng::from_seed(seed)
    }

    /// Noise for the datum observed at schedule time `time_index` by the sensor on node `sensor`.
    pub fn data_noise(&self, time_index: usize, sensor: usize) -> StreamRng {
        self.stream(&format!("data-noise/{time_index}/{sensor}"))
    }

    pub fn chain(&self, round: usize) -> StreamRng {
        self.stream(&format!("chain-round-{round}"))
    }

    pub fn strategy(&self, round: usize) -> StreamRng {
        self.stream(&format!("strategy-round-{round}"))
    }
}
