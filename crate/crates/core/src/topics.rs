//! Post-fit topic summaries: duplicate reintroduction and representative
//! documents.

use alloc::vec::Vec;

use crate::lda::{dominant_topic, token_weighted_prevalence, LdaModel};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TopicError {
    #[error("duplicate {index} points at document row {target}, but the model has {n_docs}")]
    DanglingDuplicate {
        index: usize,
        target: usize,
        n_docs: usize,
    },
    #[error("{lengths} document lengths given for a model of {n_docs} documents")]
    LengthMismatch { lengths: usize, n_docs: usize },
}

/// Document-topic rows after reintroducing removed duplicate captions.
#[derive(Debug, Clone, PartialEq)]
pub struct Reintroduced {
    /// `(n_docs + duplicates) x K`: modeled rows first, then one copy of the
    /// original's row per duplicate, in input order.
    pub gamma: Vec<f64>,
    pub lengths: Vec<usize>,
    /// Token-weighted prevalence over the extended set.
    pub theta: Vec<f64>,
}

impl Reintroduced {
    pub fn n_rows(&self, k: usize) -> usize {
        self.gamma.len() / k
    }
}

/// Give every duplicate (identified by the model row of its exact-match
/// original) a copy of that row, then recompute theta over all rows.
pub fn reintroduce_duplicates(
    model: &LdaModel,
    doc_lengths: &[usize],
    duplicate_of: &[usize],
) -> Result<Reintroduced, TopicError> {
    if doc_lengths.len() != model.n_docs {
        return Err(TopicError::LengthMismatch {
            lengths: doc_lengths.len(),
            n_docs: model.n_docs,
        });
    }
    let mut gamma = model.gamma.clone();
    let mut lengths = doc_lengths.to_vec();
    for (index, &target) in duplicate_of.iter().enumerate() {
        if target >= model.n_docs {
            return Err(TopicError::DanglingDuplicate {
                index,
                target,
                n_docs: model.n_docs,
            });
        }
        gamma.extend_from_slice(model.gamma_row(target));
        lengths.push(doc_lengths[target]);
    }
    let theta = token_weighted_prevalence(
        gamma.chunks_exact(model.k).zip(lengths.iter().copied()),
        model.k,
    );
    Ok(Reintroduced {
        gamma,
        lengths,
        theta,
    })
}

/// For each topic, up to `depth` documents whose dominant topic it is,
/// ranked by descending gamma for that topic (ties by ascending row).
pub fn ranked_dominant_docs(model: &LdaModel, depth: usize) -> Vec<Vec<usize>> {
    let mut pools: Vec<Vec<usize>> = alloc::vec![Vec::new(); model.k];
    for (d, row) in model.gamma_rows().enumerate() {
        pools[dominant_topic(row)].push(d);
    }
    for (t, pool) in pools.iter_mut().enumerate() {
        pool.sort_by(|&a, &b| {
            model.gamma[b * model.k + t]
                .total_cmp(&model.gamma[a * model.k + t])
                .then(a.cmp(&b))
        });
        pool.truncate(depth);
    }
    pools
}
