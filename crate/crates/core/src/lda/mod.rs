//! Latent Dirichlet allocation by collapsed Gibbs sampling.
//!
//! [`fit_lda`] trains a model, [`perplexity`] scores held-out documents by
//! document completion, and [`cv_sweep`] runs the k-fold grid search over
//! topic counts and `alpha = multiplier / K`.

mod model;
mod perplexity;
mod sampler;
mod sweep;

use alloc::string::String;
use alloc::vec::Vec;

pub use model::{dominant_topic, fit_lda, top_terms, FitParams, LdaModel};
pub use perplexity::{perplexity, FoldInParams, PerplexityReport};
pub use sampler::GibbsSampler;
pub use sweep::{
    cv_sweep, run_cell_fold, summarize_sweep, sweep_plan, CellSummary, SweepCell, SweepParams,
    SweepPlan, SweepResult, SweepRow,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LdaError {
    #[error("corpus has no documents")]
    EmptyCorpus,
    #[error("document {0} has no tokens")]
    EmptyDocument(usize),
    #[error("document {doc} has token id {token} outside vocabulary of size {vocab_size}")]
    TokenOutOfRange {
        doc: usize,
        token: u32,
        vocab_size: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("no evaluable held-out tokens ({excluded_docs} documents excluded)")]
    NoEvaluationTokens { excluded_docs: usize },
    #[error("{docs} documents cannot be split into {folds} folds")]
    TooFewDocuments { docs: usize, folds: usize },
    #[error("topic {topic} out of range for a {k}-topic model")]
    TopicOutOfRange { topic: usize, k: usize },
    #[error("no sweep cell produced a valid perplexity")]
    NoValidCells,
    #[error("sampler count tables are inconsistent with the corpus")]
    CountsNotConserved,
    #[error("{what} does not sum to 1 (row {row}, sum {sum})")]
    NotSimplex {
        what: &'static str,
        row: usize,
        sum: f64,
    },
}

/// Documents as token-id sequences over a vocabulary of `vocab_size` types.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    docs: Vec<Vec<u32>>,
    vocab_size: usize,
}

impl Corpus {
    /// Validates that every token id is below `vocab_size`. Empty documents
    /// are allowed here (held-out sets may contain them) but rejected by
    /// [`fit_lda`].
    pub fn new(docs: Vec<Vec<u32>>, vocab_size: usize) -> Result<Self, LdaError> {
        for (d, doc) in docs.iter().enumerate() {
            if let Some(&token) = doc.iter().find(|&&t| t as usize >= vocab_size) {
                return Err(LdaError::TokenOutOfRange {
                    doc: d,
                    token,
                    vocab_size,
                });
            }
        }
        Ok(Self { docs, vocab_size })
    }

    pub fn docs(&self) -> &[Vec<u32>] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn n_tokens(&self) -> usize {
        self.docs.iter().map(Vec::len).sum()
    }

    pub fn doc_lengths(&self) -> Vec<usize> {
        self.docs.iter().map(Vec::len).collect()
    }

    /// The documents at `indices`, in that order, over the same vocabulary.
    pub fn subset(&self, indices: &[usize]) -> Corpus {
        Corpus {
            docs: indices.iter().map(|&i| self.docs[i].clone()).collect(),
            vocab_size: self.vocab_size,
        }
    }
}

/// Token-weighted average of document-topic rows: `theta_k = sum_d n_d gamma_dk / sum_d n_d`.
pub fn token_weighted_prevalence<'a>(
    rows: impl IntoIterator<Item = (&'a [f64], usize)> + Clone,
    k: usize,
) -> Vec<f64> {
    let total: usize = rows.clone().into_iter().map(|(_, n)| n).sum();
    let mut theta = alloc::vec![0.0; k];
    if total == 0 {
        return theta;
    }
    for (row, n) in rows {
        let weight = n as f64 / total as f64;
        for (t, g) in theta.iter_mut().zip(row) {
            *t += weight * g;
        }
    }
    theta
}
