//! Synthetic corpora drawn from the LDA generative process with known
//! ("planted") parameters.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use vistopics_core::rng::StreamRng;

pub struct Planted {
    pub docs: Vec<Vec<u32>>,
    /// K x V row-major.
    pub beta: Vec<f64>,
    /// D x K row-major.
    pub theta: Vec<f64>,
    pub k: usize,
    pub vocab_size: usize,
}

/// Dirichlet draw computed in log space, so tiny concentrations (0.01)
/// do not underflow every component to zero.
pub fn dirichlet(rng: &mut StreamRng, conc: f64, n: usize) -> Vec<f64> {
    // Gamma(a) = Gamma(a + 1) * U^(1/a)
    let g = Gamma::new(conc + 1.0, 1.0).unwrap();
    let logs: Vec<f64> = (0..n)
        .map(|_| {
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            g.sample(rng).ln() + u.ln() / conc
        })
        .collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

fn categorical(rng: &mut StreamRng, p: &[f64]) -> usize {
    let u = rng.random::<f64>();
    let mut acc = 0.0;
    for (i, &x) in p.iter().enumerate() {
        acc += x;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}

pub fn generate(
    rng: &mut StreamRng,
    n_docs: usize,
    vocab_size: usize,
    k: usize,
    alpha: f64,
    eta: f64,
    mean_len: f64,
) -> Planted {
    let mut beta = Vec::with_capacity(k * vocab_size);
    for _ in 0..k {
        beta.extend(dirichlet(rng, eta, vocab_size));
    }
    let lengths = Poisson::new(mean_len).unwrap();
    let mut docs = Vec::with_capacity(n_docs);
    let mut theta = Vec::with_capacity(n_docs * k);
    for _ in 0..n_docs {
        let mix = dirichlet(rng, alpha, k);
        let n = (lengths.sample(rng) as usize).max(1);
        let doc = (0..n)
            .map(|_| {
                let t = categorical(rng, &mix);
                categorical(rng, &beta[t * vocab_size..(t + 1) * vocab_size]) as u32
            })
            .collect();
        docs.push(doc);
        theta.extend(mix);
    }
    Planted { docs, beta, theta, k, vocab_size }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Exact maximum-total-cosine matching of fitted rows to planted rows
/// (bitmask DP; fine up to ~16 topics). Returns, per planted topic, the
/// matched fitted topic and their cosine.
pub fn best_matching(planted: &[f64], fitted: &[f64], k: usize, v: usize) -> Vec<(usize, f64)> {
    let sim: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| cosine(&planted[i * v..(i + 1) * v], &fitted[j * v..(j + 1) * v]))
                .collect()
        })
        .collect();
    let full = 1usize << k;
    let mut best = vec![f64::NEG_INFINITY; full];
    let mut choice = vec![usize::MAX; full];
    best[0] = 0.0;
    for mask in 0..full {
        if best[mask] == f64::NEG_INFINITY {
            continue;
        }
        let i = mask.count_ones() as usize;
        if i == k {
            continue;
        }
        for (j, &s) in sim[i].iter().enumerate() {
            if mask & (1 << j) == 0 {
                let next = mask | (1 << j);
                let score = best[mask] + s;
                if score > best[next] {
                    best[next] = score;
                    choice[next] = j;
                }
            }
        }
    }
    let mut out = vec![(0, 0.0); k];
    let mut mask = full - 1;
    for i in (0..k).rev() {
        let j = choice[mask];
        out[i] = (j, sim[i][j]);
        mask &= !(1 << j);
    }
    out
}
