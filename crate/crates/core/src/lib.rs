//! Allocation-only core of the `vistopics` pipeline.
//!
//! Everything in this crate is pure computation over in-memory buffers:
//! difference hashing and per-video near-duplicate removal, caption
//! cleaning and vocabulary construction, collapsed Gibbs LDA with
//! document-completion perplexity and cross-validated grid search, topic
//! summaries, and the human-validation item generator and scorer. File
//! formats, the decoder process, captioning clients, and the HTTP service
//! live in the `vistopics` crate.

#![no_std]

extern crate alloc;

pub mod dedup;
pub mod hash;
pub mod lda;
pub mod rng;
pub mod text;
pub mod topics;
pub mod validation;

pub use dedup::{dedup_sequence, DedupConfig, DedupOutcome, DuplicateRow};
pub use hash::{dhash_luma, dhash_rgb8, Hash64, HashError};
pub use lda::{
    cv_sweep, dominant_topic, fit_lda, perplexity, top_terms, Corpus, FitParams, LdaError,
    LdaModel, SweepParams, SweepResult,
};
