//! Feature-conditioned topic model: the document-topic prior is pooled per
//! (product, component) combination, and per-developer topic mass is
//! accumulated from the training assignments.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::corpus::Combination;
use crate::error::{Error, Result};
use crate::lda::{sample_index, InferredTopics, LdaModel};

/// Smoothing for the developer-share denominator in recommendation scores.
pub const DEV_SHARE_EPSILON: f64 = 1e-6;

/// A trained combination-conditioned topic model with developer topic mass.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MtmModel {
    pub lda: LdaModel,
    /// Combination key -> combination index.
    pub combo_index: BTreeMap<String, usize>,
    /// Per training document, its combination index.
    pub doc_combo: Vec<usize>,
    /// n_ck: combination x topic counts.
    pub combo_topic: Vec<Vec<u32>>,
    /// Token total per combination.
    pub combo_len: Vec<u32>,
    /// Developer -> accumulated topic distribution mass over fixed reports.
    pub dev_topic_counts: BTreeMap<String, Vec<f64>>,
}

impl MtmModel {
    /// Trains the model. Every document carries a combination and an
    /// assignee. The Gibbs conditional uses the document's combination
    /// counts in place of per-document counts on the prior side.
    #[allow(clippy::too_many_arguments)]
    pub fn train(
        docs: Vec<Vec<u32>>,
        combos: &[Combination],
        assignees: &[String],
        num_topics: usize,
        vocab_size: usize,
        alpha: f64,
        beta: f64,
        seed: u64,
        iterations: usize,
    ) -> Result<MtmModel> {
        if docs.len() != combos.len() || docs.len() != assignees.len() {
            return Err(Error::argument(
                "docs, combinations, and assignees must have equal lengths",
            ));
        }
        let lda = LdaModel::init(docs, num_topics, vocab_size, alpha, beta, seed)?;

        let mut combo_index: BTreeMap<String, usize> = BTreeMap::new();
        for c in combos {
            let next = combo_index.len();
            combo_index.entry(c.key()).or_insert(next);
        }
        let doc_combo: Vec<usize> = combos.iter().map(|c| combo_index[&c.key()]).collect();
        let num_combos = combo_index.len();

        let mut model = MtmModel {
            lda,
            combo_index,
            doc_combo,
            combo_topic: vec![vec![0u32; num_topics]; num_combos],
            combo_len: vec![0u32; num_combos],
            dev_topic_counts: BTreeMap::new(),
        };
        model.rebuild_combo_counts();

        // Best-checkpoint selection on the combination-grouped joint posterior.
        let mut best_lp = model.log_joint();
        let mut best = model.snapshot();
        for it in 1..=iterations {
            model.sweep();
            if it.is_multiple_of(50) || it == iterations {
                let lp = model.log_joint();
                if lp > best_lp {
                    best_lp = lp;
                    best = model.snapshot();
                }
            }
        }
        model.restore(best);
        model.lda.estimate();

        // dev_topic_counts: one unit of mass per training report.
        let theta = model.lda.theta.clone();
        for (d, dev) in assignees.iter().enumerate() {
            let row = model
                .dev_topic_counts
                .entry(dev.clone())
                .or_insert_with(|| vec![0.0; num_topics]);
            for (k, t) in theta[d].iter().enumerate() {
                row[k] += t;
            }
        }
        Ok(model)
    }

    fn rebuild_combo_counts(&mut self) {
        for row in &mut self.combo_topic {
            row.iter_mut().for_each(|x| *x = 0);
        }
        self.combo_len.iter_mut().for_each(|x| *x = 0);
        for (d, zd) in self.lda.z.iter().enumerate() {
            let c = self.doc_combo[d];
            for &k in zd {
                self.combo_topic[c][k as usize] += 1;
                self.combo_len[c] += 1;
            }
        }
    }

    fn sweep(&mut self) {
        let num_topics = self.lda.num_topics;
        let v_beta = self.lda.vocab_size as f64 * self.lda.beta;
        let alpha = self.lda.alpha;
        let mut weights = vec![0.0; num_topics];
        for d in 0..self.lda.docs.len() {
            let c = self.doc_combo[d];
            for i in 0..self.lda.docs[d].len() {
                let w = self.lda.docs[d][i] as usize;
                let old = self.lda.z[d][i] as usize;
                self.lda.doc_topic[d][old] -= 1;
                self.lda.topic_word[old][w] -= 1;
                self.lda.topic_total[old] -= 1;
                self.combo_topic[c][old] -= 1;

                for (k, weight) in weights.iter_mut().enumerate() {
                    let doc_side = self.combo_topic[c][k] as f64 + alpha;
                    let word_side = (self.lda.topic_word[k][w] as f64 + self.lda.beta)
                        / (self.lda.topic_total[k] as f64 + v_beta);
                    *weight = doc_side * word_side;
                }
                let k = sample_index(&weights, &mut self.lda.rng);
                self.lda.z[d][i] = k as u32;
                self.lda.doc_topic[d][k] += 1;
                self.lda.topic_word[k][w] += 1;
                self.lda.topic_total[k] += 1;
                self.combo_topic[c][k] += 1;
            }
        }
    }

    /// Joint log-posterior with the document side grouped by combination.
    pub fn log_joint(&self) -> f64 {
        let k_alpha = self.lda.num_topics as f64 * self.lda.alpha;
        let mut lp = 0.0;
        for (c, row) in self.combo_topic.iter().enumerate() {
            lp += ln_gamma(k_alpha) - ln_gamma(self.combo_len[c] as f64 + k_alpha);
            for &n in row {
                lp += ln_gamma(n as f64 + self.lda.alpha) - ln_gamma(self.lda.alpha);
            }
        }
        lp + self.lda.word_side_log_joint()
    }

    fn snapshot(&self) -> MtmState {
        MtmState {
            z: self.lda.z.clone(),
            doc_topic: self.lda.doc_topic.clone(),
            topic_word: self.lda.topic_word.clone(),
            topic_total: self.lda.topic_total.clone(),
            combo_topic: self.combo_topic.clone(),
            combo_len: self.combo_len.clone(),
        }
    }

    fn restore(&mut self, s: MtmState) {
        self.lda.z = s.z;
        self.lda.doc_topic = s.doc_topic;
        self.lda.topic_word = s.topic_word;
        self.lda.topic_total = s.topic_total;
        self.combo_topic = s.combo_topic;
        self.combo_len = s.combo_len;
    }

    /// Combination-topic distribution: (n_ck + alpha) / (len_c + K*alpha).
    pub fn theta_c(&self) -> Vec<Vec<f64>> {
        let k_alpha = self.lda.num_topics as f64 * self.lda.alpha;
        self.combo_topic
            .iter()
            .enumerate()
            .map(|(c, row)| {
                let len = self.combo_len[c] as f64;
                row.iter()
                    .map(|&n| (n as f64 + self.lda.alpha) / (len + k_alpha))
                    .collect()
            })
            .collect()
    }

    /// Fold-in for a new report. A known combination shapes the prior
    /// (pseudo-counts K*alpha*theta_c, same total mass as the symmetric
    /// prior); an unseen combination falls back to the uniform prior.
    pub fn infer(&self, doc: &[u32], combo: Option<&Combination>, sweeps: usize) -> InferredTopics {
        let prior: Option<Vec<f64>> = combo
            .and_then(|c| self.combo_index.get(&c.key()).copied())
            .map(|c| {
                let k_alpha = self.lda.num_topics as f64 * self.lda.alpha;
                self.theta_c()[c].iter().map(|t| t * k_alpha).collect()
            });
        self.lda.fold_in(doc, prior.as_deref(), sweeps)
    }

    /// Ranks developers for a new report:
    /// score(dev) = sum_t theta_new[t] * share(dev, t), where share is the
    /// developer's smoothed fraction of topic t's accumulated mass.
    pub fn recommend(
        &self,
        doc: &[u32],
        combo: Option<&Combination>,
        k: usize,
        fold_in_sweeps: usize,
    ) -> Result<Vec<(String, f64)>> {
        if self.dev_topic_counts.is_empty() {
            return Err(Error::NoDevelopers);
        }
        let theta = self.infer(doc, combo, fold_in_sweeps).distribution;
        let num_topics = self.lda.num_topics;
        let num_devs = self.dev_topic_counts.len() as f64;
        let mut topic_mass = vec![0.0; num_topics];
        for row in self.dev_topic_counts.values() {
            for (k, v) in row.iter().enumerate() {
                topic_mass[k] += v;
            }
        }
        let mut scored: Vec<(String, f64)> = self
            .dev_topic_counts
            .iter()
            .map(|(dev, row)| {
                let score: f64 = (0..num_topics)
                    .map(|t| {
                        theta[t] * (row[t] + DEV_SHARE_EPSILON)
                            / (topic_mass[t] + num_devs * DEV_SHARE_EPSILON)
                    })
                    .sum();
                (dev.clone(), score)
            })
            .collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        scored.truncate(k);
        Ok(scored)
    }

    /// Update phase: the chosen developer absorbs the report's inferred
    /// topic distribution, and the combination counts absorb its fold-in
    /// assignments. An unknown developer gets a fresh row; an unseen
    /// combination gets a fresh entry.
    pub fn update(
        &mut self,
        doc: &[u32],
        combo: &Combination,
        chosen_dev: &str,
        fold_in_sweeps: usize,
    ) {
        let inferred = self.infer(doc, Some(combo), fold_in_sweeps);
        let num_topics = self.lda.num_topics;
        let row = self
            .dev_topic_counts
            .entry(chosen_dev.to_string())
            .or_insert_with(|| vec![0.0; num_topics]);
        for (k, t) in inferred.distribution.iter().enumerate() {
            row[k] += t;
        }
        let next = self.combo_index.len();
        let c = *self.combo_index.entry(combo.key()).or_insert(next);
        if c == self.combo_topic.len() {
            self.combo_topic.push(vec![0u32; num_topics]);
            self.combo_len.push(0);
        }
        for (k, &n) in inferred.assignment_counts.iter().enumerate() {
            self.combo_topic[c][k] += n;
            self.combo_len[c] += n;
        }
    }
}

struct MtmState {
    z: Vec<Vec<u32>>,
    doc_topic: Vec<Vec<u32>>,
    topic_word: Vec<Vec<u32>>,
    topic_total: Vec<u32>,
    combo_topic: Vec<Vec<u32>>,
    combo_len: Vec<u32>,
}
