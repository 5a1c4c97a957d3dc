//! Text preprocessing: tokenization, vocabularies, bag-of-words counts, and
//! TF-IDF weighting for bug-report text.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bundled English stopword list, one token per line.
pub const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

/// How tokens that look like code identifiers are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodeHandling {
    /// Split camelCase/snake_case/path tokens into alphabetic subtokens.
    SplitIdentifiers,
    /// Drop code-like tokens (non-alphabetic characters or interior capitals).
    Drop,
}

/// Configuration for the token pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenPipelineConfig {
    pub lowercase: bool,
    pub strip_punctuation: bool,
    pub remove_numbers: bool,
    pub stopword_list: BTreeSet<String>,
    /// Inclusive n-gram range; 1 <= lo <= hi <= 3.
    pub ngram_range: (usize, usize),
    pub code_handling: CodeHandling,
    pub min_token_len: usize,
}

impl Default for TokenPipelineConfig {
    fn default() -> Self {
        TokenPipelineConfig {
            lowercase: true,
            strip_punctuation: true,
            remove_numbers: true,
            stopword_list: default_stopwords(),
            ngram_range: (1, 1),
            code_handling: CodeHandling::SplitIdentifiers,
            min_token_len: 2,
        }
    }
}

impl TokenPipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.ngram_range;
        if lo < 1 || lo > hi || hi > 3 {
            return Err(Error::argument(format!(
                "ngram_range ({lo},{hi}) must satisfy 1 <= lo <= hi <= 3"
            )));
        }
        Ok(())
    }
}

/// Parses the bundled stopword list.
pub fn default_stopwords() -> BTreeSet<String> {
    parse_stopwords(DEFAULT_STOPWORDS)
}

/// Loads a stopword file (plain text, one token per line).
pub fn load_stopwords(path: &Path) -> Result<BTreeSet<String>> {
    let text = std::fs::read_to_string(path)?;
    Ok(parse_stopwords(&text))
}

fn parse_stopwords(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect()
}

fn is_word_char(c: char) -> bool {
    c.is_alphabetic()
}

/// Splits one whitespace token into alphabetic subtokens, breaking on
/// non-alphabetic characters and camelCase boundaries.
fn split_identifier(token: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut run: Vec<char> = Vec::new();
    for c in token.chars() {
        if is_word_char(c) {
            run.push(c);
        } else if !run.is_empty() {
            split_camel_run(&run, &mut out);
            run.clear();
        }
    }
    if !run.is_empty() {
        split_camel_run(&run, &mut out);
    }
    out
}

/// Breaks an alphabetic run at camelCase boundaries: before an uppercase
/// letter that follows a lowercase one, and before the last uppercase letter
/// of an uppercase run followed by lowercase (XMLParser -> XML, Parser).
fn split_camel_run(run: &[char], out: &mut Vec<String>) {
    let mut start = 0;
    for i in 1..run.len() {
        let prev = run[i - 1];
        let cur = run[i];
        let boundary = (cur.is_uppercase() && prev.is_lowercase())
            || (cur.is_uppercase()
                && prev.is_uppercase()
                && i + 1 < run.len()
                && run[i + 1].is_lowercase());
        if boundary {
            out.push(run[start..i].iter().collect());
            start = i;
        }
    }
    out.push(run[start..].iter().collect());
}

fn looks_like_code(token: &str) -> bool {
    let mut chars = token.chars();
    let Some(_first) = chars.next() else {
        return false;
    };
    if token.chars().any(|c| !c.is_alphabetic()) {
        return true;
    }
    // interior capitals, e.g. camelCase
    token.chars().skip(1).any(|c| c.is_uppercase())
}

/// Turns text into a token list by the fixed pipeline: whitespace split,
/// identifier handling, lowercasing, punctuation stripping, number removal,
/// stopword removal, length filtering, then n-gram generation.
///
/// Deterministic and pure: identical input and config yield identical output.
pub fn tokenize(text: &str, cfg: &TokenPipelineConfig) -> Vec<String> {
    let mut tokens: Vec<String> = Vec::new();
    for raw in text.split_whitespace() {
        match cfg.code_handling {
            CodeHandling::SplitIdentifiers => tokens.extend(split_identifier(raw)),
            CodeHandling::Drop => {
                if !looks_like_code(raw) {
                    tokens.push(raw.to_string());
                }
            }
        }
    }

    if cfg.lowercase {
        for t in &mut tokens {
            *t = t.to_lowercase();
        }
    }

    if cfg.strip_punctuation {
        tokens = tokens
            .into_iter()
            .map(|t| {
                t.chars()
                    .filter(|c| !c.is_ascii_punctuation() && !c.is_whitespace())
                    .collect::<String>()
            })
            .filter(|t| !t.is_empty())
            .collect();
    }

    if cfg.remove_numbers {
        tokens.retain(|t| !t.chars().all(|c| c.is_ascii_digit()));
    }

    tokens.retain(|t| !cfg.stopword_list.contains(t.to_lowercase().as_str()));
    tokens.retain(|t| t.chars().count() >= cfg.min_token_len);

    let (lo, hi) = cfg.ngram_range;
    if lo == 1 && hi == 1 {
        return tokens;
    }
    let mut grams = Vec::new();
    for n in lo..=hi {
        if n == 1 {
            grams.extend(tokens.iter().cloned());
        } else if tokens.len() >= n {
            for window in tokens.windows(n) {
                grams.push(window.join("_"));
            }
        }
    }
    grams
}

/// A token vocabulary with stable, lexicographically assigned indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    index_of: BTreeMap<String, usize>,
    tokens: Vec<String>,
    document_frequency: Vec<usize>,
    num_documents: usize,
}

impl Vocabulary {
    /// Builds a vocabulary over tokenized documents, keeping tokens with
    /// document frequency >= `min_df` and df/N <= `max_df_fraction`.
    /// Indices follow lexicographic token order.
    pub fn build(docs: &[Vec<String>], min_df: usize, max_df_fraction: f64) -> Result<Vocabulary> {
        if docs.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let num_documents = docs.len();
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in docs {
            let uniq: BTreeSet<&str> = doc.iter().map(|t| t.as_str()).collect();
            for t in uniq {
                *df.entry(t).or_insert(0) += 1;
            }
        }
        let mut index_of = BTreeMap::new();
        let mut tokens = Vec::new();
        let mut kept_df = Vec::new();
        for (t, d) in df {
            let frac = d as f64 / num_documents as f64;
            if d >= min_df && frac <= max_df_fraction {
                index_of.insert(t.to_string(), tokens.len());
                tokens.push(t.to_string());
                kept_df.push(d);
            }
        }
        if tokens.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        Ok(Vocabulary {
            index_of,
            tokens,
            document_frequency: kept_df,
            num_documents,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index(&self, token: &str) -> Option<usize> {
        self.index_of.get(token).copied()
    }

    pub fn token(&self, index: usize) -> &str {
        &self.tokens[index]
    }

    pub fn document_frequency(&self, index: usize) -> usize {
        self.document_frequency[index]
    }

    pub fn num_documents(&self) -> usize {
        self.num_documents
    }

    /// Writes the vocabulary as CSV with columns (token, index, df).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["token", "index", "df"])?;
        for (i, tok) in self.tokens.iter().enumerate() {
            w.write_record([
                tok.as_str(),
                &i.to_string(),
                &self.document_frequency[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Sparse per-document token counts against an owning vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowVector {
    pub doc_id: String,
    /// (token index, count) pairs sorted by index; counts are >= 1.
    pub counts: Vec<(usize, u32)>,
}

impl BowVector {
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&(_, c)| c as u64).sum()
    }

    pub fn with_doc_id(mut self, id: impl Into<String>) -> Self {
        self.doc_id = id.into();
        self
    }
}

/// Counts in-vocabulary tokens; out-of-vocabulary tokens are ignored.
pub fn to_bow(doc: &[String], vocab: &Vocabulary) -> BowVector {
    let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
    for t in doc {
        if let Some(i) = vocab.index(t) {
            *counts.entry(i).or_insert(0) += 1;
        }
    }
    BowVector {
        doc_id: String::new(),
        counts: counts.into_iter().collect(),
    }
}

/// Row-per-document sparse TF-IDF weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfMatrix {
    /// Sparse rows, (term index, weight) sorted by index, L2-normalized.
    pub rows: Vec<Vec<(usize, f64)>>,
    pub num_terms: usize,
}

/// Smoothed idf: ln((1 + N) / (1 + df)) + 1.
pub fn idf(vocab: &Vocabulary, term: usize) -> f64 {
    let n = vocab.num_documents() as f64;
    let df = vocab.document_frequency(term) as f64;
    ((1.0 + n) / (1.0 + df)).ln() + 1.0
}

/// Builds the TF-IDF matrix: weight(t, d) = tf(t, d) * idf(t), rows
/// L2-normalized. Rows with no in-vocabulary tokens stay all-zero.
pub fn tfidf_matrix(bows: &[BowVector], vocab: &Vocabulary) -> TfidfMatrix {
    let mut rows = Vec::with_capacity(bows.len());
    for bow in bows {
        let mut row: Vec<(usize, f64)> = bow
            .counts
            .iter()
            .map(|&(t, c)| (t, c as f64 * idf(vocab, t)))
            .collect();
        let norm = row.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, w) in &mut row {
                *w /= norm;
            }
        }
        rows.push(row);
    }
    TfidfMatrix {
        rows,
        num_terms: vocab.len(),
    }
}
