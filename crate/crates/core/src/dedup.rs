//! Greedy per-video near-duplicate removal.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::hash::Hash64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DedupConfig {
    /// Frames at or above this hash similarity to a kept frame are duplicates.
    pub threshold: f64,
}

impl Default for DedupConfig {
    fn default() -> Self {
        Self { threshold: 0.8 }
    }
}

/// One removed frame and the kept frame it duplicates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DuplicateRow {
    pub duplicate_seq: u32,
    pub original_seq: u32,
    pub similarity: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DedupOutcome {
    /// Sequence numbers of retained frames, in input order.
    pub kept: Vec<u32>,
    pub duplicates: Vec<DuplicateRow>,
}

/// Scan `(seq, hash)` pairs in order, keeping a frame unless it is at least
/// `threshold`-similar to an already kept frame. A duplicate is linked to the
/// earliest kept frame it matches, so the representative of every duplicate
/// set is its temporally first member and kept frames are pairwise below the
/// threshold.
///
/// Input is expected sorted by `seq`.
pub fn dedup_sequence(frames: &[(u32, Hash64)], cfg: &DedupConfig) -> DedupOutcome {
    let mut kept: Vec<(u32, Hash64)> = Vec::new();
    let mut duplicates = Vec::new();
    for &(seq, hash) in frames {
        let matched = kept
            .iter()
            .map(|&(kseq, khash)| (kseq, hash.similarity(khash)))
            .find(|&(_, sim)| sim >= cfg.threshold);
        match matched {
            Some((original_seq, similarity)) => duplicates.push(DuplicateRow {
                duplicate_seq: seq,
                original_seq,
                similarity,
            }),
            None => kept.push((seq, hash)),
        }
    }
    DedupOutcome {
        kept: kept.into_iter().map(|(seq, _)| seq).collect(),
        duplicates,
    }
}
