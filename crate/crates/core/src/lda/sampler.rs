use alloc::vec;
use alloc::vec::Vec;

use libm::lgamma;
use rand::Rng;

use super::{Corpus, LdaError};
use crate::rng::StreamRng;

/// Collapsed Gibbs sampler state for one chain.
///
/// Token visitation order is fixed: documents in corpus order, tokens in
/// document order. Initial assignments draw `random_range(0..K)` per token
/// in that order, and each update draws one `f64` in `[0, 1)` scaled by the
/// unnormalized conditional mass, selecting the first topic whose running
/// sum exceeds it. Any implementation following the same order and
/// arithmetic reproduces the count trajectory exactly.
pub struct GibbsSampler<'c> {
    corpus: &'c Corpus,
    k: usize,
    alpha: f64,
    eta: f64,
    v_eta: f64,
    /// Topic of every token, documents concatenated.
    assignments: Vec<u32>,
    /// Start of each document in `assignments`.
    offsets: Vec<usize>,
    /// D x K.
    doc_topic: Vec<u32>,
    /// V x K (word-major, so one token's conditional reads a contiguous row).
    word_topic: Vec<u32>,
    topic_totals: Vec<u32>,
    cumulative: Vec<f64>,
    rng: StreamRng,
}

impl<'c> GibbsSampler<'c> {
    pub fn new(
        corpus: &'c Corpus,
        k: usize,
        alpha: f64,
        eta: f64,
        mut rng: StreamRng,
    ) -> Result<Self, LdaError> {
        validate(corpus, k, alpha, eta)?;
        let v = corpus.vocab_size();
        let mut offsets = Vec::with_capacity(corpus.len() + 1);
        let mut assignments = Vec::with_capacity(corpus.n_tokens());
        let mut doc_topic = vec![0u32; corpus.len() * k];
        let mut word_topic = vec![0u32; v * k];
        let mut topic_totals = vec![0u32; k];
        for (d, doc) in corpus.docs().iter().enumerate() {
            offsets.push(assignments.len());
            for &w in doc {
                let t = rng.random_range(0..k as u32);
                assignments.push(t);
                doc_topic[d * k + t as usize] += 1;
                word_topic[w as usize * k + t as usize] += 1;
                topic_totals[t as usize] += 1;
            }
        }
        offsets.push(assignments.len());
        Ok(Self {
            corpus,
            k,
            alpha,
            eta,
            v_eta: v as f64 * eta,
            assignments,
            offsets,
            doc_topic,
            word_topic,
            topic_totals,
            cumulative: vec![0.0; k],
            rng,
        })
    }

    /// One full pass over every token.
    pub fn sweep(&mut self) {
        let k = self.k;
        for (d, doc) in self.corpus.docs().iter().enumerate() {
            let base = self.offsets[d];
            let dt = &mut self.doc_topic[d * k..(d + 1) * k];
            for (i, &w) in doc.iter().enumerate() {
                let w = w as usize;
                let wt = &mut self.word_topic[w * k..(w + 1) * k];
                let old = self.assignments[base + i] as usize;
                dt[old] -= 1;
                wt[old] -= 1;
                self.topic_totals[old] -= 1;

                let mut total = 0.0;
                for t in 0..k {
                    total += (f64::from(dt[t]) + self.alpha) * (f64::from(wt[t]) + self.eta)
                        / (f64::from(self.topic_totals[t]) + self.v_eta);
                    self.cumulative[t] = total;
                }
                let u = self.rng.random::<f64>() * total;
                let new = self.cumulative.iter().position(|&c| u < c).unwrap_or(k - 1);

                self.assignments[base + i] = new as u32;
                dt[new] += 1;
                wt[new] += 1;
                self.topic_totals[new] += 1;
            }
        }
    }

    pub fn num_topics(&self) -> usize {
        self.k
    }

    pub fn assignments(&self) -> &[u32] {
        &self.assignments
    }

    /// Row-major D x K document-topic counts.
    pub fn doc_topic_counts(&self) -> &[u32] {
        &self.doc_topic
    }

    /// Row-major K x V topic-word counts.
    pub fn topic_word_counts(&self) -> Vec<u32> {
        let v = self.corpus.vocab_size();
        let mut out = vec![0u32; self.k * v];
        for w in 0..v {
            for t in 0..self.k {
                out[t * v + w] = self.word_topic[w * self.k + t];
            }
        }
        out
    }

    pub fn topic_totals(&self) -> &[u32] {
        &self.topic_totals
    }

    pub(crate) fn topic_word(&self, t: usize, w: usize) -> u32 {
        self.word_topic[w * self.k + t]
    }

    /// Checks `sum_k n_dk = n_d` and `sum_w n_kw = n_k`.
    pub fn counts_conserved(&self) -> bool {
        let k = self.k;
        let docs_ok = self
            .corpus
            .docs()
            .iter()
            .enumerate()
            .all(|(d, doc)| self.doc_topic[d * k..(d + 1) * k].iter().sum::<u32>() as usize == doc.len());
        let mut per_topic = vec![0u32; k];
        for row in self.word_topic.chunks_exact(k) {
            for (acc, &c) in per_topic.iter_mut().zip(row) {
                *acc += c;
            }
        }
        docs_ok && per_topic == self.topic_totals
    }

    /// Collapsed joint log-likelihood `log p(w, z | alpha, eta)`.
    pub fn log_joint(&self) -> f64 {
        let k = self.k;
        let v = self.corpus.vocab_size();
        let kf = k as f64;
        let mut ll = 0.0;
        for t in 0..k {
            ll += lgamma(self.v_eta) - v as f64 * lgamma(self.eta);
            for w in 0..v {
                ll += lgamma(f64::from(self.topic_word(t, w)) + self.eta);
            }
            ll -= lgamma(f64::from(self.topic_totals[t]) + self.v_eta);
        }
        for (d, doc) in self.corpus.docs().iter().enumerate() {
            ll += lgamma(kf * self.alpha) - kf * lgamma(self.alpha);
            for &c in &self.doc_topic[d * k..(d + 1) * k] {
                ll += lgamma(f64::from(c) + self.alpha);
            }
            ll -= lgamma(doc.len() as f64 + kf * self.alpha);
        }
        ll
    }

    /// Adds the current point estimates of beta (K x V) and gamma (D x K).
    pub(crate) fn accumulate(&self, beta: &mut [f64], gamma: &mut [f64]) {
        let k = self.k;
        let v = self.corpus.vocab_size();
        for t in 0..k {
            let denom = f64::from(self.topic_totals[t]) + self.v_eta;
            for w in 0..v {
                beta[t * v + w] += (f64::from(self.topic_word(t, w)) + self.eta) / denom;
            }
        }
        let k_alpha = k as f64 * self.alpha;
        for (d, doc) in self.corpus.docs().iter().enumerate() {
            let denom = doc.len() as f64 + k_alpha;
            for t in 0..k {
                gamma[d * k + t] += (f64::from(self.doc_topic[d * k + t]) + self.alpha) / denom;
            }
        }
    }
}

fn validate(corpus: &Corpus, k: usize, alpha: f64, eta: f64) -> Result<(), LdaError> {
    if corpus.is_empty() {
        return Err(LdaError::EmptyCorpus);
    }
    if let Some(d) = corpus.docs().iter().position(Vec::is_empty) {
        return Err(LdaError::EmptyDocument(d));
    }
    if corpus.vocab_size() == 0 {
        return Err(LdaError::InvalidParams("vocabulary is empty".into()));
    }
    if k < 2 || k > u32::MAX as usize {
        return Err(LdaError::InvalidParams(alloc::format!("K must be >= 2, got {k}")));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(LdaError::InvalidParams(alloc::format!("alpha must be > 0, got {alpha}")));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(LdaError::InvalidParams(alloc::format!("eta must be > 0, got {eta}")));
    }
    Ok(())
}
