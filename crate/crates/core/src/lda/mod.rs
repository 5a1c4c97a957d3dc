//! Corpus-level topic models: collapsed-Gibbs LDA, the feature-conditioned
//! variant used for combination-aware recommendation, and a Naive Bayes
//! classifier over topic-labeled documents.

mod mtm;
mod nb;

pub use mtm::MtmModel;
pub use nb::NaiveBayesClassifier;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Conventional symmetric prior defaults: alpha = 50/K, beta = 0.01.
pub fn default_alpha(num_topics: usize) -> f64 {
    50.0 / num_topics as f64
}

pub const DEFAULT_BETA: f64 = 0.01;
pub const DEFAULT_ITERATIONS: usize = 500;
pub const DEFAULT_FOLD_IN_SWEEPS: usize = 100;
const CHECKPOINT_EVERY: usize = 50;

// Stream separator so fold-in draws never reuse the training stream.
const FOLD_IN_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Topic distribution inferred for a new document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferredTopics {
    pub distribution: Vec<f64>,
    /// Per-topic assignment counts from the final fold-in state.
    pub assignment_counts: Vec<u32>,
    /// True when the document had no in-vocabulary tokens and the uniform
    /// fallback was returned.
    pub oov_fallback: bool,
}

/// Collapsed-Gibbs LDA state. Counts are always consistent with the
/// assignment vectors `z`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LdaModel {
    pub num_topics: usize,
    pub vocab_size: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Token-index sequence per document.
    pub docs: Vec<Vec<u32>>,
    /// Per-document per-position topic assignments.
    pub z: Vec<Vec<u32>>,
    /// n_dk: document x topic counts.
    pub doc_topic: Vec<Vec<u32>>,
    /// n_kw: topic x word counts.
    pub topic_word: Vec<Vec<u32>>,
    /// n_k: per-topic totals.
    pub topic_total: Vec<u32>,
    /// Document-topic point estimate, filled by `train`.
    pub theta: Vec<Vec<f64>>,
    /// Topic-word point estimate, filled by `train`.
    pub phi: Vec<Vec<f64>>,
    pub rng_seed: u64,
    #[serde(skip, default = "zero_rng")]
    rng: ChaCha8Rng,
}

fn zero_rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0)
}

impl LdaModel {
    /// Initializes a model by assigning every token position a
    /// uniform-random topic drawn from the seeded generator.
    pub fn init(
        docs: Vec<Vec<u32>>,
        num_topics: usize,
        vocab_size: usize,
        alpha: f64,
        beta: f64,
        seed: u64,
    ) -> Result<LdaModel> {
        if docs.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if num_topics < 1 {
            return Err(Error::argument("num_topics must be >= 1"));
        }
        for doc in &docs {
            if let Some(&w) = doc.iter().find(|&&w| w as usize >= vocab_size) {
                return Err(Error::argument(format!(
                    "token index {w} out of range for vocabulary of size {vocab_size}"
                )));
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut z: Vec<Vec<u32>> = Vec::with_capacity(docs.len());
        let mut doc_topic = vec![vec![0u32; num_topics]; docs.len()];
        let mut topic_word = vec![vec![0u32; vocab_size]; num_topics];
        let mut topic_total = vec![0u32; num_topics];

        for (d, doc) in docs.iter().enumerate() {
            let mut zd = Vec::with_capacity(doc.len());
            for &w in doc {
                let k = rng.gen_range(0..num_topics);
                zd.push(k as u32);
                doc_topic[d][k] += 1;
                topic_word[k][w as usize] += 1;
                topic_total[k] += 1;
            }
            z.push(zd);
        }

        Ok(LdaModel {
            num_topics,
            vocab_size,
            alpha,
            beta,
            docs,
            z,
            doc_topic,
            topic_word,
            topic_total,
            theta: Vec::new(),
            phi: Vec::new(),
            rng_seed: seed,
            rng,
        })
    }

    fn remove_site(&mut self, d: usize, i: usize) -> (usize, usize) {
        let w = self.docs[d][i] as usize;
        let k = self.z[d][i] as usize;
        self.doc_topic[d][k] -= 1;
        self.topic_word[k][w] -= 1;
        self.topic_total[k] -= 1;
        (w, k)
    }

    fn add_site(&mut self, d: usize, i: usize, w: usize, k: usize) {
        self.z[d][i] = k as u32;
        self.doc_topic[d][k] += 1;
        self.topic_word[k][w] += 1;
        self.topic_total[k] += 1;
    }

    /// Unnormalized collapsed conditional for word `w` in document `d`,
    /// with the site's counts already excluded:
    /// (n_dk + alpha) * (n_kw + beta) / (n_k + V*beta).
    fn site_weights(&self, d: usize, w: usize, out: &mut Vec<f64>) {
        let vb = self.vocab_size as f64 * self.beta;
        out.clear();
        for k in 0..self.num_topics {
            let doc_side = self.doc_topic[d][k] as f64 + self.alpha;
            let word_side = (self.topic_word[k][w] as f64 + self.beta)
                / (self.topic_total[k] as f64 + vb);
            out.push(doc_side * word_side);
        }
    }

    /// Normalized conditional distribution at one site, for diagnostics.
    /// Counts are excluded, evaluated, and restored.
    pub fn conditional_at(&mut self, d: usize, i: usize) -> Vec<f64> {
        let (w, k) = self.remove_site(d, i);
        let mut weights = Vec::with_capacity(self.num_topics);
        self.site_weights(d, w, &mut weights);
        self.add_site(d, i, w, k);
        let total: f64 = weights.iter().sum();
        weights.iter().map(|x| x / total).collect()
    }

    /// One full collapsed Gibbs pass, document-major, position-ascending.
    pub fn sweep(&mut self) {
        let mut weights: Vec<f64> = Vec::with_capacity(self.num_topics);
        for d in 0..self.docs.len() {
            for i in 0..self.docs[d].len() {
                let (w, _) = self.remove_site(d, i);
                self.site_weights(d, w, &mut weights);
                let k = sample_index(&weights, &mut self.rng);
                self.add_site(d, i, w, k);
            }
        }
    }

    /// Joint log-posterior log p(w, z) under the collapsed model.
    pub fn log_joint(&self) -> f64 {
        let k_alpha = self.num_topics as f64 * self.alpha;
        let mut lp = 0.0;
        for (d, doc) in self.docs.iter().enumerate() {
            lp += ln_gamma(k_alpha) - ln_gamma(doc.len() as f64 + k_alpha);
            for k in 0..self.num_topics {
                lp += ln_gamma(self.doc_topic[d][k] as f64 + self.alpha) - ln_gamma(self.alpha);
            }
        }
        lp += self.word_side_log_joint();
        lp
    }

    pub(crate) fn word_side_log_joint(&self) -> f64 {
        let v_beta = self.vocab_size as f64 * self.beta;
        let mut lp = 0.0;
        for k in 0..self.num_topics {
            lp += ln_gamma(v_beta) - ln_gamma(self.topic_total[k] as f64 + v_beta);
            for w in 0..self.vocab_size {
                if self.topic_word[k][w] > 0 {
                    lp += ln_gamma(self.topic_word[k][w] as f64 + self.beta) - ln_gamma(self.beta);
                }
            }
        }
        // zero-count cells contribute ln_gamma(beta) - ln_gamma(beta) = 0
        lp
    }

    fn snapshot(&self) -> GibbsState {
        GibbsState {
            z: self.z.clone(),
            doc_topic: self.doc_topic.clone(),
            topic_word: self.topic_word.clone(),
            topic_total: self.topic_total.clone(),
        }
    }

    fn restore(&mut self, s: GibbsState) {
        self.z = s.z;
        self.doc_topic = s.doc_topic;
        self.topic_word = s.topic_word;
        self.topic_total = s.topic_total;
    }

    /// Runs `iterations` sweeps and keeps the assignment state with the
    /// highest joint log-posterior across checkpoints (every 50 sweeps and
    /// the final one), then estimates theta and phi from it.
    pub fn train(&mut self, iterations: usize) {
        let mut best_lp = self.log_joint();
        let mut best = self.snapshot();
        for it in 1..=iterations {
            self.sweep();
            if it.is_multiple_of(CHECKPOINT_EVERY) || it == iterations {
                let lp = self.log_joint();
                if lp > best_lp {
                    best_lp = lp;
                    best = self.snapshot();
                }
            }
        }
        self.restore(best);
        self.estimate();
    }

    /// Fills theta and phi from the current counts.
    pub fn estimate(&mut self) {
        let k_alpha = self.num_topics as f64 * self.alpha;
        let v_beta = self.vocab_size as f64 * self.beta;
        self.theta = self
            .docs
            .iter()
            .enumerate()
            .map(|(d, doc)| {
                let len = doc.len() as f64;
                (0..self.num_topics)
                    .map(|k| (self.doc_topic[d][k] as f64 + self.alpha) / (len + k_alpha))
                    .collect()
            })
            .collect();
        self.phi = (0..self.num_topics)
            .map(|k| {
                (0..self.vocab_size)
                    .map(|w| {
                        (self.topic_word[k][w] as f64 + self.beta)
                            / (self.topic_total[k] as f64 + v_beta)
                    })
                    .collect()
            })
            .collect();
    }

    /// Gibbs fold-in for a new document with the word-side counts held
    /// fixed. Out-of-range token indices are dropped. `prior` replaces the
    /// symmetric alpha pseudo-counts when given; it must sum to K*alpha.
    pub fn fold_in(
        &self,
        doc: &[u32],
        prior: Option<&[f64]>,
        sweeps: usize,
    ) -> InferredTopics {
        let tokens: Vec<usize> = doc
            .iter()
            .filter(|&&w| (w as usize) < self.vocab_size)
            .map(|&w| w as usize)
            .collect();
        let k_alpha = self.num_topics as f64 * self.alpha;
        let prior_at = |k: usize| -> f64 {
            match prior {
                Some(p) => p[k],
                None => self.alpha,
            }
        };
        if tokens.is_empty() {
            return InferredTopics {
                distribution: vec![1.0 / self.num_topics as f64; self.num_topics],
                assignment_counts: vec![0; self.num_topics],
                oov_fallback: true,
            };
        }

        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed ^ FOLD_IN_SEED_SALT);
        let v_beta = self.vocab_size as f64 * self.beta;
        let mut counts = vec![0u32; self.num_topics];
        let mut assign = Vec::with_capacity(tokens.len());
        for _ in &tokens {
            let k = rng.gen_range(0..self.num_topics);
            assign.push(k);
            counts[k] += 1;
        }

        let mut weights = vec![0.0; self.num_topics];
        for _ in 0..sweeps {
            for (i, &w) in tokens.iter().enumerate() {
                let old = assign[i];
                counts[old] -= 1;
                for k in 0..self.num_topics {
                    let doc_side = counts[k] as f64 + prior_at(k);
                    let word_side = (self.topic_word[k][w] as f64 + self.beta)
                        / (self.topic_total[k] as f64 + v_beta);
                    weights[k] = doc_side * word_side;
                }
                let k = sample_index(&weights, &mut rng);
                assign[i] = k;
                counts[k] += 1;
            }
        }

        let len = tokens.len() as f64;
        let distribution = (0..self.num_topics)
            .map(|k| (counts[k] as f64 + prior_at(k)) / (len + k_alpha))
            .collect();
        InferredTopics {
            distribution,
            assignment_counts: counts,
            oov_fallback: false,
        }
    }

    /// Smoothed topic distribution for a new document under the symmetric
    /// prior.
    pub fn infer(&self, doc: &[u32], fold_in_sweeps: usize) -> InferredTopics {
        self.fold_in(doc, None, fold_in_sweeps)
    }
}

#[derive(Clone)]
struct GibbsState {
    z: Vec<Vec<u32>>,
    doc_topic: Vec<Vec<u32>>,
    topic_word: Vec<Vec<u32>>,
    topic_total: Vec<u32>,
}

/// Draws an index proportionally to the (unnormalized) weights.
pub(crate) fn sample_index(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let u: f64 = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (k, &w) in weights.iter().enumerate() {
        acc += w;
        if u <= acc {
            return k;
        }
    }
    weights.len() - 1
}
