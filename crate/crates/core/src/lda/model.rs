use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::sampler::GibbsSampler;
use super::{token_weighted_prevalence, Corpus, LdaError};
use crate::rng::{self, streams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    pub k: usize,
    pub alpha: f64,
    pub eta: f64,
    pub iters: usize,
    pub burn_in: usize,
    /// Post-burn-in samples are averaged every `thin` iterations.
    pub thin: usize,
    pub seed: u64,
    /// Random stream within `seed`; sweep cells use distinct streams.
    pub stream: u64,
}

impl FitParams {
    pub fn new(k: usize, alpha: f64, seed: u64) -> Self {
        Self {
            k,
            alpha,
            eta: 0.01,
            iters: 1000,
            burn_in: 500,
            thin: 10,
            seed,
            stream: streams::FIT,
        }
    }

    fn validate(&self) -> Result<(), LdaError> {
        if self.iters <= self.burn_in {
            return Err(LdaError::InvalidParams(alloc::format!(
                "iters ({}) must exceed burn_in ({})",
                self.iters,
                self.burn_in
            )));
        }
        if self.thin == 0 {
            return Err(LdaError::InvalidParams("thin must be >= 1".into()));
        }
        Ok(())
    }

    /// Whether the state after iteration `it` (1-based) is averaged.
    fn is_sample(&self, it: usize) -> bool {
        it > self.burn_in && (it - self.burn_in).is_multiple_of(self.thin)
    }
}

/// A fitted model: beta is K x V, gamma is D x K, both row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub k: usize,
    pub alpha: f64,
    pub eta: f64,
    pub seed: u64,
    pub iters: usize,
    pub vocab_size: usize,
    pub n_docs: usize,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub theta: Vec<f64>,
}

impl LdaModel {
    pub fn beta_row(&self, topic: usize) -> &[f64] {
        &self.beta[topic * self.vocab_size..(topic + 1) * self.vocab_size]
    }

    pub fn gamma_row(&self, doc: usize) -> &[f64] {
        &self.gamma[doc * self.k..(doc + 1) * self.k]
    }

    pub fn gamma_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.gamma.chunks_exact(self.k)
    }

    /// Every beta and gamma row, and theta, sums to 1 within `tol` with no
    /// negative entries.
    pub fn check_simplex(&self, tol: f64) -> Result<(), LdaError> {
        check_rows("beta", self.beta.chunks_exact(self.vocab_size), tol)?;
        check_rows("gamma", self.gamma.chunks_exact(self.k), tol)?;
        check_rows("theta", core::iter::once(self.theta.as_slice()), tol)
    }
}

fn check_rows<'a>(
    what: &'static str,
    rows: impl Iterator<Item = &'a [f64]>,
    tol: f64,
) -> Result<(), LdaError> {
    for (row, values) in rows.enumerate() {
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > tol || values.iter().any(|&x| x.is_nan() || x < 0.0) {
            return Err(LdaError::NotSimplex { what, row, sum });
        }
    }
    Ok(())
}

/// Fit LDA by collapsed Gibbs sampling. Beta and gamma are the posterior-mean
/// point estimates averaged over the thinned post-burn-in states; theta is
/// the token-weighted average of the gamma rows.
pub fn fit_lda(corpus: &Corpus, params: &FitParams) -> Result<LdaModel, LdaError> {
    params.validate()?;
    let mut sampler = GibbsSampler::new(
        corpus,
        params.k,
        params.alpha,
        params.eta,
        rng::stream(params.seed, params.stream),
    )?;
    let (k, v, d) = (params.k, corpus.vocab_size(), corpus.len());
    let mut beta = vec![0.0; k * v];
    let mut gamma = vec![0.0; d * k];
    let mut samples = 0usize;
    for it in 1..=params.iters {
        sampler.sweep();
        if params.is_sample(it) {
            sampler.accumulate(&mut beta, &mut gamma);
            samples += 1;
        }
    }
    if !sampler.counts_conserved() {
        return Err(LdaError::CountsNotConserved);
    }
    if samples == 0 {
        sampler.accumulate(&mut beta, &mut gamma);
        samples = 1;
    }
    let samples = samples as f64;
    beta.iter_mut().chain(gamma.iter_mut()).for_each(|x| *x /= samples);

    let lengths = corpus.doc_lengths();
    let theta = token_weighted_prevalence(gamma.chunks_exact(k).zip(lengths), k);
    Ok(LdaModel {
        k,
        alpha: params.alpha,
        eta: params.eta,
        seed: params.seed,
        iters: params.iters,
        vocab_size: v,
        n_docs: d,
        beta,
        gamma,
        theta,
    })
}

/// The `n` most probable terms of `topic`, ties broken by ascending id.
pub fn top_terms(model: &LdaModel, topic: usize, n: usize) -> Result<Vec<(u32, f64)>, LdaError> {
    if topic >= model.k {
        return Err(LdaError::TopicOutOfRange { topic, k: model.k });
    }
    let row = model.beta_row(topic);
    let mut ids: Vec<u32> = (0..row.len() as u32).collect();
    ids.sort_by(|&a, &b| {
        row[b as usize]
            .total_cmp(&row[a as usize])
            .then(a.cmp(&b))
    });
    Ok(ids
        .into_iter()
        .take(n)
        .map(|id| (id, row[id as usize]))
        .collect())
}

/// Argmax of a document-topic row; ties go to the lowest index.
pub fn dominant_topic(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in row.iter().enumerate().skip(1) {
        if x > row[best] {
            best = i;
        }
    }
    best
}
