//! Deterministic random stream for a simulation.
//!
//! One stream per simulation, seeded from the config. Replica runs derive
//! their streams as `seed + replica_index`. The generator's position in the
//! stream can be read back and restored exactly, which is what makes
//! checkpoint resume reproduce the uninterrupted run bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Counter-based generator wrapper with an exactly serializable position.
#[derive(Clone, Debug)]
pub struct SimRng {
    seed: u64,
    inner: ChaCha8Rng,
}

/// Snapshot of a stream: seed plus word position. Restoring it puts the
/// generator back on the identical draw sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub word_pos: u128,
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn state(&self) -> RngState {
        RngState {
            seed: self.seed,
            word_pos: self.inner.get_word_pos(),
        }
    }

    pub fn restore(state: RngState) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(state.seed);
        inner.set_word_pos(state.word_pos);
        Self {
            seed: state.seed,
            inner,
        }
    }

    /// Uniform draw on the half-open interval [0, 1).
    pub fn unit(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// Uniform draw on (0, 1]. Never returns zero, so it is safe as the
    /// argument of a logarithm.
    pub fn open_unit(&mut self) -> f64 {
        1.0 - self.inner.gen::<f64>()
    }

    /// Unbiased uniform integer in [0, n).
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        self.inner.gen_range(0..n)
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.inner.gen::<f64>() < p
    }
}
