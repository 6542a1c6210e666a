use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{LdaError, LdaModel};
use crate::rng::{self, streams, StreamRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldInParams {
    pub iters: usize,
    /// Fold-in sweeps discarded before averaging the document mixture.
    pub burn_in: usize,
    pub seed: u64,
    pub stream: u64,
}

impl FoldInParams {
    pub fn new(seed: u64) -> Self {
        Self {
            iters: 50,
            burn_in: 25,
            seed,
            stream: streams::FOLD_IN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerplexityReport {
    pub perplexity: f64,
    /// Held-out tokens scored (odd positions of in-vocabulary tokens).
    pub eval_tokens: usize,
    /// Documents with no in-vocabulary token.
    pub excluded_docs: usize,
    /// Out-of-vocabulary tokens dropped before splitting.
    pub unseen_tokens: usize,
}

/// Document-completion perplexity.
///
/// Each held-out document keeps its in-vocabulary tokens; even positions
/// fold in a topic mixture by Gibbs sampling with beta frozen, odd positions
/// are scored under `sum_k mix_k beta_kw`. The result is
/// `exp(-total log-likelihood / scored tokens)`.
pub fn perplexity(
    model: &LdaModel,
    held_out: &[Vec<u32>],
    params: &FoldInParams,
) -> Result<PerplexityReport, LdaError> {
    if params.iters <= params.burn_in {
        return Err(LdaError::InvalidParams(alloc::format!(
            "fold-in iters ({}) must exceed burn_in ({})",
            params.iters,
            params.burn_in
        )));
    }
    let mut rng = rng::stream(params.seed, params.stream);
    let mut folder = FoldIn::new(model);
    let mut log_lik = 0.0;
    let mut eval_tokens = 0usize;
    let mut excluded_docs = 0usize;
    let mut unseen_tokens = 0usize;

    for doc in held_out {
        let seen: Vec<u32> = doc
            .iter()
            .copied()
            .filter(|&w| (w as usize) < model.vocab_size)
            .collect();
        unseen_tokens += doc.len() - seen.len();
        if seen.is_empty() {
            excluded_docs += 1;
            continue;
        }
        let observed: Vec<u32> = seen.iter().copied().step_by(2).collect();
        let scored: Vec<u32> = seen.iter().copied().skip(1).step_by(2).collect();
        if scored.is_empty() {
            continue;
        }
        let mix = folder.run(&observed, params, &mut rng);
        let mass: f64 = mix.iter().sum();
        for &w in &scored {
            let p: f64 = mix
                .iter()
                .enumerate()
                .map(|(k, m)| m * model.beta[k * model.vocab_size + w as usize])
                .sum::<f64>()
                / mass;
            log_lik += libm::log(p);
        }
        eval_tokens += scored.len();
    }

    if eval_tokens == 0 {
        return Err(LdaError::NoEvaluationTokens { excluded_docs });
    }
    Ok(PerplexityReport {
        perplexity: libm::exp(-log_lik / eval_tokens as f64),
        eval_tokens,
        excluded_docs,
        unseen_tokens,
    })
}

/// Gibbs fold-in of a single document against frozen topics.
struct FoldIn<'m> {
    model: &'m LdaModel,
    counts: Vec<u32>,
    cumulative: Vec<f64>,
    mix: Vec<f64>,
}

impl<'m> FoldIn<'m> {
    fn new(model: &'m LdaModel) -> Self {
        Self {
            model,
            counts: vec![0; model.k],
            cumulative: vec![0.0; model.k],
            mix: vec![0.0; model.k],
        }
    }

    /// Averaged `(n_dk + alpha) / (n_d + K alpha)` over post-burn-in sweeps.
    fn run(&mut self, tokens: &[u32], params: &FoldInParams, rng: &mut StreamRng) -> &[f64] {
        let (k, v) = (self.model.k, self.model.vocab_size);
        let alpha = self.model.alpha;
        self.counts.iter_mut().for_each(|c| *c = 0);
        self.mix.iter_mut().for_each(|m| *m = 0.0);
        let mut z: Vec<usize> = tokens
            .iter()
            .map(|_| rng.random_range(0..k as u32) as usize)
            .collect();
        for &t in &z {
            self.counts[t] += 1;
        }
        let denom = tokens.len() as f64 + k as f64 * alpha;
        for it in 1..=params.iters {
            for (i, &w) in tokens.iter().enumerate() {
                self.counts[z[i]] -= 1;
                let mut total = 0.0;
                for t in 0..k {
                    total += (f64::from(self.counts[t]) + alpha) * self.model.beta[t * v + w as usize];
                    self.cumulative[t] = total;
                }
                let u = rng.random::<f64>() * total;
                let new = self.cumulative.iter().position(|&c| u < c).unwrap_or(k - 1);
                z[i] = new;
                self.counts[new] += 1;
            }
            if it > params.burn_in {
                for (m, &c) in self.mix.iter_mut().zip(&self.counts) {
                    *m += (f64::from(c) + alpha) / denom;
                }
            }
        }
        let samples = (params.iters - params.burn_in) as f64;
        self.mix.iter_mut().for_each(|m| *m /= samples);
        &self.mix
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(k: usize, v: usize, beta: Vec<f64>) -> LdaModel {
        LdaModel {
            k,
            alpha: 0.1,
            eta: 0.01,
            seed: 0,
            iters: 1,
            vocab_size: v,
            n_docs: 0,
            beta,
            gamma: vec![],
            theta: vec![1.0 / k as f64; k],
        }
    }

    #[test]
    fn single_type_vocabulary_has_unit_perplexity() {
        let m = model(3, 1, vec![1.0; 3]);
        let r = perplexity(&m, &[vec![0, 0, 0, 0], vec![0, 0]], &FoldInParams::new(1)).unwrap();
        assert_eq!(r.perplexity, 1.0);
        assert_eq!(r.eval_tokens, 3);
    }

    #[test]
    fn uniform_topics_give_vocabulary_size() {
        let v = 7;
        let m = model(2, v, vec![1.0 / v as f64; 2 * v]);
        let docs = [vec![0, 1, 2, 3, 4, 5, 6], vec![6, 6, 5]];
        let r = perplexity(&m, &docs, &FoldInParams::new(4)).unwrap();
        assert!((r.perplexity - v as f64).abs() < 1e-9, "{}", r.perplexity);
    }

    #[test]
    fn unseen_tokens_are_dropped_and_counted() {
        let m = model(2, 2, vec![0.5, 0.5, 0.5, 0.5]);
        let docs = [vec![5, 6], vec![0, 9, 1]];
        let r = perplexity(&m, &docs, &FoldInParams::new(0)).unwrap();
        assert_eq!(r.excluded_docs, 1);
        assert_eq!(r.unseen_tokens, 3);
        assert_eq!(r.eval_tokens, 1);
        assert!(matches!(
            perplexity(&m, &[vec![9]], &FoldInParams::new(0)),
            Err(LdaError::NoEvaluationTokens { excluded_docs: 1 })
        ));
    }

    #[test]
    fn fold_in_prefers_the_matching_topic() {
        // Topic 0 emits word 0, topic 1 emits word 1.
        let m = model(2, 2, vec![0.99, 0.01, 0.01, 0.99]);
        let good = perplexity(&m, &[vec![0; 20]], &FoldInParams::new(2)).unwrap();
        let mixed = perplexity(&m, &[[0, 1].repeat(10)], &FoldInParams::new(2)).unwrap();
        assert!(good.perplexity < 1.2, "{}", good.perplexity);
        assert!(mixed.perplexity > good.perplexity);
    }
}
