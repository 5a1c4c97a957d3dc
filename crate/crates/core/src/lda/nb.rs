//! Multinomial Naive Bayes over topic-labeled token documents, with
//! Laplace smoothing.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesClassifier {
    /// Class labels, sorted.
    pub classes: Vec<String>,
    /// Log prior per class.
    pub log_priors: Vec<f64>,
    pub token_index: BTreeMap<String, usize>,
    /// Per-class token log-likelihoods, class-major.
    pub log_likelihood: Vec<Vec<f64>>,
    pub smoothing: f64,
}

impl NaiveBayesClassifier {
    /// Trains on (tokens, class label) pairs. Requires at least one
    /// document per class present in the input.
    pub fn train(docs: &[(Vec<String>, String)], smoothing: f64) -> Result<NaiveBayesClassifier> {
        if docs.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if smoothing <= 0.0 {
            return Err(Error::argument("smoothing must be > 0"));
        }

        let mut token_index: BTreeMap<String, usize> = BTreeMap::new();
        for (tokens, _) in docs {
            for t in tokens {
                let next = token_index.len();
                token_index.entry(t.clone()).or_insert(next);
            }
        }
        // Re-index lexicographically for stable vectors.
        for (i, v) in token_index.values_mut().enumerate() {
            *v = i;
        }
        let vocab_size = token_index.len();
        if vocab_size == 0 {
            return Err(Error::EmptyVocabulary);
        }

        let mut class_docs: BTreeMap<&str, usize> = BTreeMap::new();
        let mut class_tokens: BTreeMap<&str, Vec<u64>> = BTreeMap::new();
        for (tokens, label) in docs {
            *class_docs.entry(label.as_str()).or_insert(0) += 1;
            let counts = class_tokens
                .entry(label.as_str())
                .or_insert_with(|| vec![0u64; vocab_size]);
            for t in tokens {
                counts[token_index[t]] += 1;
            }
        }

        let total_docs = docs.len() as f64;
        let classes: Vec<String> = class_docs.keys().map(|s| s.to_string()).collect();
        let log_priors: Vec<f64> = classes
            .iter()
            .map(|c| (class_docs[c.as_str()] as f64 / total_docs).ln())
            .collect();
        let log_likelihood: Vec<Vec<f64>> = classes
            .iter()
            .map(|c| {
                let counts = &class_tokens[c.as_str()];
                let total: u64 = counts.iter().sum();
                let denom = total as f64 + smoothing * vocab_size as f64;
                counts
                    .iter()
                    .map(|&n| ((n as f64 + smoothing) / denom).ln())
                    .collect()
            })
            .collect();

        Ok(NaiveBayesClassifier {
            classes,
            log_priors,
            token_index,
            log_likelihood,
            smoothing,
        })
    }

    /// Ranks all classes by log posterior = log prior + sum of token
    /// log-likelihoods. Out-of-vocabulary tokens are ignored; a document
    /// with no known tokens is ranked by priors alone. Ties break
    /// lexicographically by class label.
    pub fn predict(&self, tokens: &[String]) -> Vec<(String, f64)> {
        let mut scored: Vec<(String, f64)> = self
            .classes
            .iter()
            .enumerate()
            .map(|(c, label)| {
                let mut lp = self.log_priors[c];
                for t in tokens {
                    if let Some(&i) = self.token_index.get(t) {
                        lp += self.log_likelihood[c][i];
                    }
                }
                (label.clone(), lp)
            })
            .collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        scored
    }
}
