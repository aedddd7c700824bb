//! Random stream discipline: each trajectory owns a pair of ChaCha
//! substreams, one for action sampling and one for state transitions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Resumable position of a [`StreamPair`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub index: u64,
    pub action_word_pos: u128,
    pub transition_word_pos: u128,
}

/// Two independent substreams derived from `(seed, index)`.
#[derive(Debug, Clone)]
pub struct StreamPair {
    seed: u64,
    index: u64,
    pub action: ChaCha8Rng,
    pub transition: ChaCha8Rng,
}

impl StreamPair {
    /// Substreams `2·index` and `2·index + 1` of the ChaCha generator seeded by `seed`.
    pub fn new(seed: u64, index: u64) -> StreamPair {
        let mut action = ChaCha8Rng::seed_from_u64(seed);
        action.set_stream(2 * index);
        let mut transition = ChaCha8Rng::seed_from_u64(seed);
        transition.set_stream(2 * index + 1);
        StreamPair { seed, index, action, transition }
    }

    pub fn state(&self) -> RngState {
        RngState {
            seed: self.seed,
            index: self.index,
            action_word_pos: self.action.get_word_pos(),
            transition_word_pos: self.transition.get_word_pos(),
        }
    }

    pub fn restore(state: &RngState) -> StreamPair {
        let mut pair = StreamPair::new(state.seed, state.index);
        pair.action.set_word_pos(state.action_word_pos);
        pair.transition.set_word_pos(state.transition_word_pos);
        pair
    }
}

/// Stream index used by Monte Carlo continuation `k` from checkpoint `n`.
pub fn continuation_index(n: u64, k: u64) -> Result<u64> {
    if n >= 1 << 40 || k >= 1 << 20 {
        return Err(Error::InvalidArgument("continuation index out of range".into()));
    }
    Ok(1 + (n << 20) + k)
}

/// Inverse-CDF draw from a probability row using one uniform variate.
pub fn sample_index<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(probs.len() - 1)
}
