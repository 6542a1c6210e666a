//! Reference collapsed Gibbs sampler written for clarity, not speed.
//!
//! Every conditional recounts n_dk, n_kw and n_k from the full assignment
//! vector, excluding the token being resampled. It visits tokens in the
//! same order and consumes the random stream the same way as the optimized
//! sampler, so the two must agree exactly.

use rand::Rng;
use vistopics_core::rng::StreamRng;

pub struct NaiveGibbs {
    pub docs: Vec<Vec<u32>>,
    pub vocab_size: usize,
    pub k: usize,
    pub alpha: f64,
    pub eta: f64,
    /// z[d][i]
    pub z: Vec<Vec<usize>>,
    rng: StreamRng,
}

impl NaiveGibbs {
    pub fn new(docs: Vec<Vec<u32>>, vocab_size: usize, k: usize, alpha: f64, eta: f64, mut rng: StreamRng) -> Self {
        let z = docs
            .iter()
            .map(|doc| doc.iter().map(|_| rng.random_range(0..k as u32) as usize).collect())
            .collect();
        Self { docs, vocab_size, k, alpha, eta, z, rng }
    }

    fn count_doc_topic(&self, d: usize, skip: (usize, usize), t: usize) -> u32 {
        self.z[d]
            .iter()
            .enumerate()
            .filter(|&(i, &zi)| (d, i) != skip && zi == t)
            .count() as u32
    }

    fn count_topic_word(&self, t: usize, w: u32, skip: (usize, usize)) -> u32 {
        let mut n = 0;
        for (d, doc) in self.docs.iter().enumerate() {
            for (i, &wi) in doc.iter().enumerate() {
                if (d, i) != skip && wi == w && self.z[d][i] == t {
                    n += 1;
                }
            }
        }
        n
    }

    fn count_topic(&self, t: usize, skip: (usize, usize)) -> u32 {
        let mut n = 0;
        for (d, zs) in self.z.iter().enumerate() {
            for (i, &zi) in zs.iter().enumerate() {
                if (d, i) != skip && zi == t {
                    n += 1;
                }
            }
        }
        n
    }

    pub fn sweep(&mut self) {
        let v_eta = self.vocab_size as f64 * self.eta;
        for d in 0..self.docs.len() {
            for i in 0..self.docs[d].len() {
                let w = self.docs[d][i];
                let mut weights = Vec::with_capacity(self.k);
                for t in 0..self.k {
                    let ndk = f64::from(self.count_doc_topic(d, (d, i), t));
                    let nkw = f64::from(self.count_topic_word(t, w, (d, i)));
                    let nk = f64::from(self.count_topic(t, (d, i)));
                    weights.push((ndk + self.alpha) * (nkw + self.eta) / (nk + v_eta));
                }
                let mut running = Vec::with_capacity(self.k);
                let mut total = 0.0;
                for p in &weights {
                    total += p;
                    running.push(total);
                }
                let u = self.rng.random::<f64>() * total;
                let mut chosen = self.k - 1;
                for (t, &c) in running.iter().enumerate() {
                    if u < c {
                        chosen = t;
                        break;
                    }
                }
                self.z[d][i] = chosen;
            }
        }
    }

    /// Row-major D x K.
    pub fn doc_topic_counts(&self) -> Vec<u32> {
        let mut out = vec![0; self.docs.len() * self.k];
        for (d, zs) in self.z.iter().enumerate() {
            for &t in zs {
                out[d * self.k + t] += 1;
            }
        }
        out
    }

    /// Row-major K x V.
    pub fn topic_word_counts(&self) -> Vec<u32> {
        let mut out = vec![0; self.k * self.vocab_size];
        for (doc, zs) in self.docs.iter().zip(&self.z) {
            for (&w, &t) in doc.iter().zip(zs) {
                out[t * self.vocab_size + w as usize] += 1;
            }
        }
        out
    }
}
