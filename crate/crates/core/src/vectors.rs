// SPDX-License-Identifier: Apache-2.0

//! Bit-packed test vector sets.
//!
//! Vectors are stored 64 to a chunk: `chunk[c][i]` holds input `i` of
//! vectors `64c .. 64c + 63`, one per bit.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Largest input count enumerated exhaustively by [`VectorMode::auto`].
pub const EXHAUSTIVE_LIMIT: usize = 20;
pub const DEFAULT_SAMPLE_COUNT: usize = 10_000;
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum VectorMode {
    /// All `2^n` assignments, in binary counting order.
    Exhaustive,
    /// `count` uniformly random assignments from a ChaCha8 stream.
    Sampled { count: usize, seed: u64 },
}

impl VectorMode {
    /// Exhaustive up to [`EXHAUSTIVE_LIMIT`] inputs, otherwise sampled.
    pub fn auto(n_inputs: usize, count: usize, seed: u64) -> Self {
        if n_inputs <= EXHAUSTIVE_LIMIT {
            VectorMode::Exhaustive
        } else {
            VectorMode::Sampled { count, seed }
        }
    }

    /// Exhaustive when `2^n <= count` (the sample would cover every
    /// assignment anyway), otherwise sampled.
    pub fn covering(n_inputs: usize, count: usize, seed: u64) -> Self {
        if n_inputs < usize::BITS as usize && (1usize << n_inputs) <= count {
            VectorMode::Exhaustive
        } else {
            VectorMode::Sampled { count, seed }
        }
    }
}

#[derive(Debug, Clone)]
pub struct PackedVectors {
    n_inputs: usize,
    count: usize,
    chunks: Vec<Vec<u64>>,
}

impl PackedVectors {
    pub fn generate(n_inputs: usize, mode: VectorMode) -> Self {
        match mode {
            VectorMode::Exhaustive => Self::exhaustive(n_inputs),
            VectorMode::Sampled { count, seed } => Self::sampled(n_inputs, count, seed),
        }
    }

    pub fn exhaustive(n_inputs: usize) -> Self {
        assert!(n_inputs < 40, "exhaustive enumeration of {n_inputs} inputs");
        let count = 1usize << n_inputs;
        let n_chunks = count.div_ceil(64);
        let chunks = (0..n_chunks)
            .map(|c| {
                (0..n_inputs)
                    .map(|i| {
                        let mut word = 0u64;
                        for lane in 0..64 {
                            let v = c * 64 + lane;
                            if v < count && (v >> i) & 1 == 1 {
                                word |= 1 << lane;
                            }
                        }
                        word
                    })
                    .collect()
            })
            .collect();
        PackedVectors {
            n_inputs,
            count,
            chunks,
        }
    }

    pub fn sampled(n_inputs: usize, count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let chunks = (0..count.div_ceil(64))
            .map(|_| (0..n_inputs).map(|_| rng.next_u64()).collect())
            .collect();
        PackedVectors {
            n_inputs,
            count,
            chunks,
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    /// Number of vectors.
    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn chunks(&self) -> &[Vec<u64>] {
        &self.chunks
    }

    /// Lanes of chunk `c` that hold real vectors.
    pub fn lane_mask(&self, c: usize) -> u64 {
        let remaining = self.count - c * 64;
        if remaining >= 64 {
            !0
        } else {
            (1u64 << remaining) - 1
        }
    }

    /// Unpacks vector `v`.
    pub fn vector(&self, v: usize) -> Vec<bool> {
        let (c, lane) = (v / 64, v % 64);
        self.chunks[c].iter().map(|w| (w >> lane) & 1 == 1).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exhaustive_counts_in_binary() {
        let vs = PackedVectors::exhaustive(3);
        assert_eq!(vs.len(), 8);
        assert_eq!(vs.lane_mask(0), 0xff);
        assert_eq!(vs.vector(5), vec![true, false, true]);
    }

    #[test]
    fn sampled_is_reproducible() {
        let a = PackedVectors::sampled(36, 1000, 7);
        let b = PackedVectors::sampled(36, 1000, 7);
        assert_eq!(a.chunks(), b.chunks());
        assert_eq!(a.chunks().len(), 16);
        assert_eq!(a.lane_mask(15).count_ones(), 1000 - 15 * 64);
        assert_ne!(a.chunks(), PackedVectors::sampled(36, 1000, 8).chunks());
    }

    #[test]
    fn covering_switches_to_exhaustive() {
        assert_eq!(VectorMode::covering(5, 10_000, 1), VectorMode::Exhaustive);
        assert_eq!(
            VectorMode::covering(36, 10_000, 1),
            VectorMode::Sampled {
                count: 10_000,
                seed: 1
            }
        );
    }
}
