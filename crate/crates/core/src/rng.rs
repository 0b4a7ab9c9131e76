//! Seeded random streams.
//!
//! Every run derives independent ChaCha streams from one integer seed, one
//! stream per purpose, so that for instance two arms of an A/B comparison
//! consume identical training batches regardless of how the model differs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type LabRng = ChaCha8Rng;

/// Purpose tags for the independent streams of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init = 1,
    Train = 2,
    Eval = 3,
    ProbeTrain = 4,
    ProbeTest = 5,
}

pub fn stream(seed: u64, purpose: Stream) -> LabRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose as u64);
    rng
}

/// Serializable position of a ChaCha stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngCursor {
    pub seed: u64,
    pub stream: u64,
    /// Word position, kept as a decimal string because it is a `u128`.
    pub word_pos: String,
}

impl RngCursor {
    pub fn capture(seed: u64, rng: &LabRng) -> Self {
        RngCursor {
            seed,
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    pub fn restore(&self) -> Option<LabRng> {
        let pos: u128 = self.word_pos.parse().ok()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(pos);
        Some(rng)
    }
}
