//! Document embedding providers: a self-contained TF-IDF + latent semantic
//! projection, or vectors loaded from an external per-document file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textprep::{tfidf_matrix, to_bow, tokenize, BowVector, TokenPipelineConfig, Vocabulary};

use super::pca::{pca_fit, pca_transform};

/// Embedding backend selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbeddingProvider {
    /// TF-IDF rows projected onto their top principal axes. The effective
    /// dimension is min(dims, N-1, vocabulary size).
    TfidfLsa { dims: usize },
    /// CSV file: first column document id, remaining columns one vector.
    ExternalFile { path: PathBuf },
}

impl EmbeddingProvider {
    pub fn tfidf_lsa(dims: usize) -> Self {
        EmbeddingProvider::TfidfLsa { dims }
    }
}

/// A document to embed: id plus pre-tokenized content.
#[derive(Debug, Clone)]
pub struct EmbedDoc {
    pub id: String,
    pub tokens: Vec<String>,
}

impl EmbedDoc {
    pub fn from_text(id: impl Into<String>, text: &str, cfg: &TokenPipelineConfig) -> Self {
        EmbedDoc {
            id: id.into(),
            tokens: tokenize(text, cfg),
        }
    }
}

/// Embeds documents into an N x d matrix per the provider.
pub fn embed(
    docs: &[EmbedDoc],
    provider: &EmbeddingProvider,
    vocab: &Vocabulary,
) -> Result<Vec<Vec<f64>>> {
    match provider {
        EmbeddingProvider::TfidfLsa { dims } => embed_tfidf_lsa(docs, vocab, *dims),
        EmbeddingProvider::ExternalFile { path } => {
            embed_external(docs, path)
        }
    }
}

fn embed_tfidf_lsa(docs: &[EmbedDoc], vocab: &Vocabulary, dims: usize) -> Result<Vec<Vec<f64>>> {
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let bows: Vec<BowVector> = docs.iter().map(|d| to_bow(&d.tokens, vocab)).collect();
    let tfidf = tfidf_matrix(&bows, vocab);
    let dense: Vec<Vec<f64>> = tfidf
        .rows
        .iter()
        .map(|row| {
            let mut v = vec![0.0; vocab.len()];
            for &(t, w) in row {
                v[t] = w;
            }
            v
        })
        .collect();
    let n = dense.len();
    if n == 1 {
        // nothing to project; a single document keeps its tf-idf row
        return Ok(dense);
    }
    let effective = dims.max(1).min(n - 1).min(vocab.len());
    let pca = pca_fit(&dense, effective)?;
    Ok(pca_transform(&pca, &dense))
}

fn embed_external(docs: &[EmbedDoc], path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    let mut by_id: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut width: Option<usize> = None;
    for record in rdr.records() {
        let record = record?;
        let mut iter = record.iter();
        let Some(id) = iter.next() else { continue };
        let vector: Vec<f64> = iter
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::argument(format!("bad number in embedding row `{id}`")))
            })
            .collect::<Result<_>>()?;
        match width {
            None => width = Some(vector.len()),
            Some(w) if w != vector.len() => {
                return Err(Error::EmbeddingDimension {
                    id: id.to_string(),
                    got: vector.len(),
                    expected: w,
                })
            }
            _ => {}
        }
        by_id.insert(id.to_string(), vector);
    }
    docs.iter()
        .map(|d| {
            by_id
                .get(&d.id)
                .cloned()
                .ok_or_else(|| Error::MissingEmbedding(d.id.clone()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn docs_from(texts: &[&str]) -> (Vec<EmbedDoc>, Vocabulary) {
        let cfg = TokenPipelineConfig::default();
        let docs: Vec<EmbedDoc> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| EmbedDoc::from_text(format!("d{i}"), t, &cfg))
            .collect();
        let token_lists: Vec<Vec<String>> = docs.iter().map(|d| d.tokens.clone()).collect();
        let vocab = Vocabulary::build(&token_lists, 1, 1.0).unwrap();
        (docs, vocab)
    }

    fn cos(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    #[test]
    fn identical_documents_identical_rows() {
        let (docs, vocab) = docs_from(&[
            "crash during startup sequence",
            "crash during startup sequence",
            "window layout broken badly",
        ]);
        let m = embed(&docs, &EmbeddingProvider::tfidf_lsa(2), &vocab).unwrap();
        assert_eq!(m[0], m[1]);
    }

    #[test]
    fn near_duplicates_closer_than_disjoint() {
        let (docs, vocab) = docs_from(&[
            "editor crash when saving file",
            "editor crash when saving buffer",
            "network timeout on remote socket",
            "garbage collector pause spike",
        ]);
        let m = embed(&docs, &EmbeddingProvider::tfidf_lsa(3), &vocab).unwrap();
        assert!(cos(&m[0], &m[1]) > cos(&m[0], &m[2]));
    }

    #[test]
    fn external_file_pass_through_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vectors.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "d0,1.0,2.0,3.0").unwrap();
        writeln!(f, "d1,4.0,5.0,6.0").unwrap();
        drop(f);

        let cfg = TokenPipelineConfig::default();
        let docs = vec![
            EmbedDoc::from_text("d0", "launcher overlay", &cfg),
            EmbedDoc::from_text("d1", "spinner widget", &cfg),
        ];
        let token_lists: Vec<Vec<String>> = docs.iter().map(|d| d.tokens.clone()).collect();
        let vocab = Vocabulary::build(&token_lists, 1, 1.0).unwrap();
        let provider = EmbeddingProvider::ExternalFile { path: path.clone() };
        let m = embed(&docs, &provider, &vocab).unwrap();
        assert_eq!(m, vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);

        let missing = vec![EmbedDoc::from_text("dX", "unmapped document", &cfg)];
        let err = embed(&missing, &provider, &vocab).unwrap_err();
        assert!(matches!(err, Error::MissingEmbedding(id) if id == "dX"));
    }

    #[test]
    fn external_file_dimension_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "d0,1.0,2.0").unwrap();
        writeln!(f, "d1,4.0").unwrap();
        drop(f);
        let cfg = TokenPipelineConfig::default();
        let docs = vec![EmbedDoc::from_text("d0", "ragged vectors", &cfg)];
        let token_lists: Vec<Vec<String>> = docs.iter().map(|d| d.tokens.clone()).collect();
        let vocab = Vocabulary::build(&token_lists, 1, 1.0).unwrap();
        let err = embed(&docs, &EmbeddingProvider::ExternalFile { path }, &vocab).unwrap_err();
        assert!(matches!(err, Error::EmbeddingDimension { id, .. } if id == "d1"));
    }
}
