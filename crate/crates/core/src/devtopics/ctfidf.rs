//! Class-based TF-IDF: one representative term vector per cluster, weighted
//! by W(t, c) = tf(t, c) * ln(1 + A / f(t)) with A the mean token count per
//! class and f(t) the term's total count across classes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textprep::Vocabulary;

pub const DEFAULT_TOP_N: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicVector {
    /// Cluster label this topic represents.
    pub label: i64,
    /// Sparse (term index, weight), sorted by index; weights >= 0.
    pub weights: Vec<(usize, f64)>,
    /// The top_n largest-weight terms, ties broken lexicographically.
    pub top_words: Vec<String>,
    /// Documents in the cluster.
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicRepresentation {
    pub topics: Vec<TopicVector>,
    /// A: mean token count per class at fit time.
    pub mean_tokens_per_class: f64,
    /// f(t): total count per term across all classes, sparse.
    pub term_totals: Vec<(usize, f64)>,
}

impl TopicRepresentation {
    pub fn num_topics(&self) -> usize {
        self.topics.len()
    }

    /// Applies the fitted weighting to a raw term-count vector so documents
    /// and topics live in the same space.
    pub fn weight_terms(&self, term_counts: &[(usize, f64)]) -> Vec<(usize, f64)> {
        let totals: BTreeMap<usize, f64> = self.term_totals.iter().copied().collect();
        term_counts
            .iter()
            .filter_map(|&(t, tf)| {
                totals.get(&t).map(|f| {
                    (t, tf * (1.0 + self.mean_tokens_per_class / f).ln())
                })
            })
            .collect()
    }
}

/// Builds the per-cluster representation from token lists. The outlier
/// class (-1) is excluded; out-of-vocabulary tokens are skipped.
pub fn ctfidf(
    docs: &[Vec<String>],
    labels: &[i64],
    vocab: &Vocabulary,
    top_n: usize,
) -> Result<TopicRepresentation> {
    let doc_terms: Vec<Vec<(usize, f64)>> = docs
        .iter()
        .map(|doc| {
            let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
            for token in doc {
                if let Some(t) = vocab.index(token) {
                    *counts.entry(t).or_insert(0.0) += 1.0;
                }
            }
            counts.into_iter().collect()
        })
        .collect();
    ctfidf_from_counts(&doc_terms, labels, vocab, top_n)
}

/// Same as [`ctfidf`] over pre-counted sparse term vectors.
pub fn ctfidf_from_counts(
    doc_terms: &[Vec<(usize, f64)>],
    labels: &[i64],
    vocab: &Vocabulary,
    top_n: usize,
) -> Result<TopicRepresentation> {
    if doc_terms.len() != labels.len() {
        return Err(Error::argument("docs and labels must be parallel"));
    }
    let mut class_tf: BTreeMap<i64, BTreeMap<usize, f64>> = BTreeMap::new();
    let mut class_sizes: BTreeMap<i64, usize> = BTreeMap::new();
    for (terms, &label) in doc_terms.iter().zip(labels) {
        if label < 0 {
            continue;
        }
        *class_sizes.entry(label).or_insert(0) += 1;
        let tf = class_tf.entry(label).or_default();
        for &(t, c) in terms {
            *tf.entry(t).or_insert(0.0) += c;
        }
    }
    if class_tf.is_empty() {
        return Err(Error::argument("ctfidf needs at least one non-outlier cluster"));
    }

    let num_classes = class_tf.len() as f64;
    let mut term_totals: BTreeMap<usize, f64> = BTreeMap::new();
    let mut total_tokens = 0.0;
    for tf in class_tf.values() {
        for (&t, &c) in tf {
            *term_totals.entry(t).or_insert(0.0) += c;
            total_tokens += c;
        }
    }
    let mean_tokens_per_class = total_tokens / num_classes;

    let topics = class_tf
        .iter()
        .map(|(&label, tf)| {
            let weights: Vec<(usize, f64)> = tf
                .iter()
                .map(|(&t, &count)| {
                    let f = term_totals[&t];
                    (t, count * (1.0 + mean_tokens_per_class / f).ln())
                })
                .collect();
            let top_words = top_words(&weights, vocab, top_n);
            TopicVector {
                label,
                weights,
                top_words,
                size: class_sizes[&label],
            }
        })
        .collect();

    Ok(TopicRepresentation {
        topics,
        mean_tokens_per_class,
        term_totals: term_totals.into_iter().collect(),
    })
}

fn top_words(weights: &[(usize, f64)], vocab: &Vocabulary, top_n: usize) -> Vec<String> {
    let mut ranked: Vec<(usize, f64)> = weights.to_vec();
    ranked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap()
            .then_with(|| vocab.token(a.0).cmp(vocab.token(b.0)))
    });
    ranked
        .into_iter()
        .take(top_n)
        .map(|(t, _)| vocab.token(t).to_string())
        .collect()
}

/// Cosine similarity between sparse, index-sorted vectors.
pub fn cosine(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let mut dot = 0.0;
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                dot += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    let na: f64 = a.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
