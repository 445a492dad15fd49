//! Seeded randomness.
//!
//! All draws go through [`RngState`], a ChaCha8 stream. Streams for
//! individual sentences are derived by hashing `(run_seed, sentence index,
//! augmentation index)` with SHA-256, so results do not depend on the order
//! in which sentences are processed or on how many threads process them.
//!
//! Integer draws are made on `u64` ranges and floats via the 53-bit
//! conversion, so a given seed produces the same draws on 32- and 64-bit
//! targets.

use std::fmt;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Seed used when the caller gives none.
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Error, PartialEq)]
#[error("probability must lie in [0, 1], got {0}")]
pub struct InvalidProbability(pub f64);

/// A probability in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

impl Probability {
    pub const ZERO: Probability = Probability(0.0);
    pub const ONE: Probability = Probability(1.0);

    pub fn new(p: f64) -> Result<Self, InvalidProbability> {
        if (0.0..=1.0).contains(&p) {
            Ok(Probability(p))
        } else {
            Err(InvalidProbability(p))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Probability {
    type Error = InvalidProbability;

    fn try_from(p: f64) -> Result<Self, Self::Error> {
        Probability::new(p)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone)]
pub struct RngState(ChaCha8Rng);

impl RngState {
    pub fn from_seed(seed: u64) -> Self {
        Self::derive(seed, 0, 0)
    }

    /// Independent stream for one augmentation of one sentence.
    pub fn derive(run_seed: u64, sentence_index: u64, augmentation_index: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"ner-augment/rng/v1");
        h.update(run_seed.to_le_bytes());
        h.update(sentence_index.to_le_bytes());
        h.update(augmentation_index.to_le_bytes());
        RngState(ChaCha8Rng::from_seed(h.finalize().into()))
    }

    /// One Bernoulli draw. A uniform is consumed even for p = 0 or p = 1 so
    /// that the rest of the stream does not shift with p.
    pub fn bernoulli(&mut self, p: Probability) -> bool {
        let u: f64 = self.0.random();
        u < p.0
    }

    /// Uniform index in `0..n`. Panics if `n == 0`.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "cannot sample from an empty range");
        self.0.random_range(0..n as u64) as usize
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
}

/// Combines a seed with a label into a new seed; used to give each plan or
/// sub-task its own stream.
pub fn mix_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(b"ner-augment/seed/v1");
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}
