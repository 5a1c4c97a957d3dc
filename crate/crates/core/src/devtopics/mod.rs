//! Per-developer topic models: embedding, dimensionality reduction,
//! clustering, class-based term representation, topic reduction, outlier
//! reduction, and report scoring.

pub mod ctfidf;
pub mod density;
pub mod embed;
pub mod kmeans;
pub mod pca;

pub use ctfidf::{cosine, ctfidf, ctfidf_from_counts, TopicRepresentation, TopicVector, DEFAULT_TOP_N};
pub use density::{density_cluster, DEFAULT_MIN_CLUSTER_SIZE, DEFAULT_MIN_SAMPLES};
pub use embed::{embed, EmbedDoc, EmbeddingProvider};
pub use kmeans::{kmeans, DEFAULT_MAX_ITER};
pub use pca::{pca_fit, pca_inverse_transform, pca_transform, PcaModel};

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::BugReport;
use crate::error::{Error, Result};
use crate::textprep::{tokenize, TokenPipelineConfig, Vocabulary};

/// Default report-count threshold below which outlier reduction runs.
pub const DEFAULT_SMALL_MODEL_THRESHOLD: usize = 300;
/// Minimum cosine similarity for an outlier to join a topic.
pub const DEFAULT_OUTLIER_SIMILARITY: f64 = 0.05;
/// Default topic-count target for topic reduction.
pub const DEFAULT_REDUCE_TO: usize = 10;

/// Parameters a clustering run was performed with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum ClusterParams {
    KMeans {
        k: usize,
        seed: u64,
        max_iter: usize,
    },
    Density {
        min_cluster_size: usize,
        min_samples: usize,
    },
}

/// Cluster labels over a document set; -1 marks outliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: Vec<i64>,
    pub num_clusters: usize,
    /// Mean point per cluster.
    pub centroids: Vec<Vec<f64>>,
    pub params: ClusterParams,
    pub inertia: Option<f64>,
    /// K-means records inertia after each assignment step.
    pub inertia_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reducer {
    Pca { dims: usize },
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Clusterer {
    Density {
        min_cluster_size: usize,
        min_samples: usize,
    },
    KMeans {
        k: usize,
    },
}

/// Full configuration for fitting one developer model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DevModelConfig {
    pub pipeline: TokenPipelineConfig,
    pub embedding: EmbeddingProvider,
    pub reducer: Reducer,
    pub clusterer: Clusterer,
    pub reduce_to: usize,
    pub small_model_threshold: usize,
    pub min_reports: usize,
    pub top_n_words: usize,
    pub outlier_similarity: f64,
    pub seed: u64,
}

impl Default for DevModelConfig {
    fn default() -> Self {
        DevModelConfig {
            pipeline: TokenPipelineConfig::default(),
            embedding: EmbeddingProvider::tfidf_lsa(64),
            reducer: Reducer::Pca { dims: 5 },
            clusterer: Clusterer::Density {
                min_cluster_size: DEFAULT_MIN_CLUSTER_SIZE,
                min_samples: DEFAULT_MIN_SAMPLES,
            },
            reduce_to: DEFAULT_REDUCE_TO,
            small_model_threshold: DEFAULT_SMALL_MODEL_THRESHOLD,
            min_reports: 1,
            top_n_words: DEFAULT_TOP_N,
            outlier_similarity: DEFAULT_OUTLIER_SIMILARITY,
            seed: 42,
        }
    }
}

/// A fitted per-developer pipeline, serializable and reloadable with
/// identical scoring behavior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeveloperTopicModel {
    pub developer: String,
    pub provider: EmbeddingProvider,
    pub pca: Option<PcaModel>,
    pub clusters: ClusterAssignment,
    pub representation: TopicRepresentation,
    pub vocab: Vocabulary,
    pub pipeline: TokenPipelineConfig,
    /// Sparse raw term counts per training document, for reduction passes.
    pub doc_terms: Vec<Vec<(usize, f64)>>,
    pub report_ids: Vec<String>,
    pub date_range: (DateTime<Utc>, DateTime<Utc>),
    pub seed: u64,
}

fn normalize_feature(value: &str) -> String {
    let v = value.trim().to_lowercase();
    if v.is_empty() {
        "none".to_string()
    } else {
        v.split_whitespace().collect::<Vec<_>>().join("-")
    }
}

/// Tokens for one report: pipeline tokens plus feature pseudo-tokens for
/// product, component, priority, and severity.
pub fn report_tokens(report: &BugReport, cfg: &TokenPipelineConfig) -> Vec<String> {
    let mut tokens = tokenize(&report.text(), cfg);
    tokens.push(format!("prod={}", normalize_feature(&report.product)));
    tokens.push(format!("comp={}", normalize_feature(&report.component)));
    tokens.push(format!("prio={}", report.priority));
    tokens.push(format!("sev={}", report.severity));
    tokens
}

fn term_counts(tokens: &[String], vocab: &Vocabulary) -> Vec<(usize, f64)> {
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for t in tokens {
        if let Some(i) = vocab.index(t) {
            *counts.entry(i).or_insert(0.0) += 1.0;
        }
    }
    counts.into_iter().collect()
}

/// Fits the full pipeline on one developer's training reports.
pub fn fit_developer_model(
    developer: &str,
    reports: &[BugReport],
    cfg: &DevModelConfig,
) -> Result<DeveloperTopicModel> {
    if reports.len() < cfg.min_reports.max(1) {
        return Err(Error::argument(format!(
            "developer `{developer}` has {} reports, needs at least {}",
            reports.len(),
            cfg.min_reports.max(1)
        )));
    }
    cfg.pipeline.validate()?;

    let token_lists: Vec<Vec<String>> = reports
        .iter()
        .map(|r| report_tokens(r, &cfg.pipeline))
        .collect();
    let vocab = Vocabulary::build(&token_lists, 1, 1.0)?;
    let doc_terms: Vec<Vec<(usize, f64)>> = token_lists
        .iter()
        .map(|t| term_counts(t, &vocab))
        .collect();

    let embed_docs: Vec<EmbedDoc> = reports
        .iter()
        .zip(&token_lists)
        .map(|(r, tokens)| EmbedDoc {
            id: r.id.clone(),
            tokens: tokens.clone(),
        })
        .collect();
    let embedded = embed(&embed_docs, &cfg.embedding, &vocab)?;

    let (pca_model, reduced) = match cfg.reducer {
        Reducer::Pca { dims } => {
            let n = embedded.len();
            let d = embedded[0].len();
            let effective = dims.max(1).min(n.saturating_sub(1)).min(d);
            if n < 2 || effective == 0 {
                (None, embedded)
            } else {
                let model = pca_fit(&embedded, effective)?;
                let transformed = pca_transform(&model, &embedded);
                (Some(model), transformed)
            }
        }
        Reducer::None => (None, embedded),
    };

    let mut clusters = match cfg.clusterer {
        Clusterer::Density {
            min_cluster_size,
            min_samples,
        } => {
            let mcs = min_cluster_size.min(reduced.len()).max(1);
            density_cluster(&reduced, mcs, min_samples)?
        }
        Clusterer::KMeans { k } => {
            let k = k.max(1).min(reduced.len());
            kmeans(&reduced, k, cfg.seed, DEFAULT_MAX_ITER)?
        }
    };
    if clusters.num_clusters == 0 {
        // density clustering rejected everything as noise
        let k = ((reduced.len() as f64).sqrt().floor() as usize)
            .max(2)
            .min(reduced.len());
        clusters = kmeans(&reduced, k, cfg.seed, DEFAULT_MAX_ITER)?;
    }

    let representation = ctfidf::ctfidf_from_counts(
        &doc_terms,
        &clusters.labels,
        &vocab,
        cfg.top_n_words,
    )?;

    let date_range = (
        reports.iter().map(|r| r.created_time).min().unwrap(),
        reports.iter().map(|r| r.created_time).max().unwrap(),
    );
    let mut model = DeveloperTopicModel {
        developer: developer.to_string(),
        provider: cfg.embedding.clone(),
        pca: pca_model,
        clusters,
        representation,
        vocab,
        pipeline: cfg.pipeline.clone(),
        doc_terms,
        report_ids: reports.iter().map(|r| r.id.clone()).collect(),
        date_range,
        seed: cfg.seed,
    };

    if model.representation.num_topics() > cfg.reduce_to {
        reduce_topics(&mut model, cfg.reduce_to, cfg.top_n_words)?;
    }
    if reports.len() < cfg.small_model_threshold {
        reduce_outliers(&mut model, cfg.outlier_similarity, cfg.top_n_words)?;
    }
    Ok(model)
}

/// Merges the most-similar topic pair (cosine over c-TF-IDF vectors) until
/// at most `target` topics remain, then compacts labels to 0..C-1.
pub fn reduce_topics(
    model: &mut DeveloperTopicModel,
    target: usize,
    top_n_words: usize,
) -> Result<()> {
    if target < 1 {
        return Err(Error::argument("topic reduction target must be >= 1"));
    }
    while model.representation.num_topics() > target {
        let topics = &model.representation.topics;
        let mut best: Option<(f64, i64, i64)> = None;
        for i in 0..topics.len() {
            for j in (i + 1)..topics.len() {
                let sim = cosine(&topics[i].weights, &topics[j].weights);
                let candidate = (sim, topics[i].label, topics[j].label);
                best = match best {
                    None => Some(candidate),
                    Some(cur) => {
                        // higher similarity wins; ties go to the smaller pair
                        if sim > cur.0 + 1e-15
                            || ((sim - cur.0).abs() <= 1e-15
                                && (candidate.1, candidate.2) < (cur.1, cur.2))
                        {
                            Some(candidate)
                        } else {
                            Some(cur)
                        }
                    }
                };
            }
        }
        let Some((_, keep, merge)) = best else { break };
        for l in &mut model.clusters.labels {
            if *l == merge {
                *l = keep;
            }
        }
        model.representation = ctfidf::ctfidf_from_counts(
            &model.doc_terms,
            &model.clusters.labels,
            &model.vocab,
            top_n_words,
        )?;
    }
    compact_labels(model, top_n_words)
}

fn compact_labels(model: &mut DeveloperTopicModel, top_n_words: usize) -> Result<()> {
    let mut remap: BTreeMap<i64, i64> = BTreeMap::new();
    for &l in &model.clusters.labels {
        if l >= 0 {
            let next = remap.len() as i64;
            remap.entry(l).or_insert(next);
        }
    }
    let changed = remap.iter().any(|(&old, &new)| old != new);
    model.clusters.num_clusters = remap.len();
    if !changed {
        return Ok(());
    }
    for l in &mut model.clusters.labels {
        if *l >= 0 {
            *l = remap[l];
        }
    }
    model.representation = ctfidf::ctfidf_from_counts(
        &model.doc_terms,
        &model.clusters.labels,
        &model.vocab,
        top_n_words,
    )?;
    Ok(())
}

/// Reassigns each outlier document to its most similar topic when the
/// cosine similarity clears the threshold; the representation is recomputed
/// once afterward. A model with no clusters is left unchanged.
pub fn reduce_outliers(
    model: &mut DeveloperTopicModel,
    similarity_threshold: f64,
    top_n_words: usize,
) -> Result<bool> {
    if model.clusters.num_clusters == 0 {
        return Ok(false);
    }
    let mut changed = false;
    let mut new_labels = model.clusters.labels.clone();
    for (i, &label) in model.clusters.labels.iter().enumerate() {
        if label != -1 {
            continue;
        }
        let doc_vec = model.representation.weight_terms(&model.doc_terms[i]);
        let mut best: Option<(f64, i64)> = None;
        for topic in &model.representation.topics {
            let sim = cosine(&doc_vec, &topic.weights);
            if best.is_none_or(|(s, _)| sim > s) {
                best = Some((sim, topic.label));
            }
        }
        if let Some((sim, label)) = best {
            if sim >= similarity_threshold {
                new_labels[i] = label;
                changed = true;
            }
        }
    }
    if changed {
        model.clusters.labels = new_labels;
        model.representation = ctfidf::ctfidf_from_counts(
            &model.doc_terms,
            &model.clusters.labels,
            &model.vocab,
            top_n_words,
        )?;
    }
    Ok(true)
}

/// Scores a report against the model: the maximum cosine similarity between
/// the report's weighted term vector and any topic vector, clamped to
/// [0, 1]. Reports with no vocabulary overlap score 0.
pub fn score_document(model: &DeveloperTopicModel, report: &BugReport) -> f64 {
    let tokens = report_tokens(report, &model.pipeline);
    let counts = term_counts(&tokens, &model.vocab);
    if counts.is_empty() {
        return 0.0;
    }
    let doc_vec = model.representation.weight_terms(&counts);
    let mut best: f64 = 0.0;
    for topic in &model.representation.topics {
        best = best.max(cosine(&doc_vec, &topic.weights));
    }
    best.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn report(id: &str, title: &str, product: &str, day: u32) -> BugReport {
        BugReport {
            id: id.to_string(),
            product: product.to_string(),
            component: "core".to_string(),
            title: title.to_string(),
            description: String::new(),
            comments: vec![],
            priority: 3,
            severity: 4,
            status: "RESOLVED".to_string(),
            resolution: "FIXED".to_string(),
            assignee: "dev".to_string(),
            created_time: Utc.with_ymd_and_hms(2012, 1, 1, 0, 0, 0).unwrap()
                + chrono::Duration::days(day as i64),
            resolved_time: None,
        }
    }

    fn crash_report(id: &str, day: u32) -> BugReport {
        report(
            id,
            "segfault crash panic backtrace kernel oops stack corruption",
            "runtime",
            day,
        )
    }

    fn ui_report(id: &str, day: u32) -> BugReport {
        report(
            id,
            "window layout button widget toolbar render pixel spacing",
            "desktop",
            day,
        )
    }

    fn small_config() -> DevModelConfig {
        DevModelConfig {
            embedding: EmbeddingProvider::tfidf_lsa(8),
            reducer: Reducer::Pca { dims: 3 },
            ..Default::default()
        }
    }

    #[test]
    fn fit_separates_disjoint_vocabularies() {
        let mut reports = Vec::new();
        for i in 0..60 {
            reports.push(crash_report(&format!("c{i}"), i));
        }
        for i in 0..60 {
            reports.push(ui_report(&format!("u{i}"), 60 + i));
        }
        let model = fit_developer_model("dev", &reports, &small_config()).unwrap();
        assert!(model.representation.num_topics() >= 2);
        let has_crash_topic = model
            .representation
            .topics
            .iter()
            .any(|t| t.top_words.iter().any(|w| w == "segfault" || w == "crash"));
        let has_ui_topic = model
            .representation
            .topics
            .iter()
            .any(|t| t.top_words.iter().any(|w| w == "layout" || w == "widget"));
        assert!(has_crash_topic && has_ui_topic);
    }

    #[test]
    fn fit_deterministic_serialization() {
        let reports: Vec<BugReport> = (0..30).map(|i| crash_report(&format!("c{i}"), i)).collect();
        let a = fit_developer_model("dev", &reports, &small_config()).unwrap();
        let b = fit_developer_model("dev", &reports, &small_config()).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn fit_identical_reports_single_topic() {
        let reports: Vec<BugReport> = (0..100)
            .map(|i| {
                let mut r = crash_report(&format!("c{i}"), 1);
                r.title = "same crash every time".to_string();
                r
            })
            .collect();
        let model = fit_developer_model("dev", &reports, &small_config()).unwrap();
        assert_eq!(model.representation.num_topics(), 1);
    }

    #[test]
    fn score_identical_report_is_one() {
        // one-document topics: force per-point clusters with kmeans k = n
        let reports: Vec<BugReport> = vec![
            crash_report("a", 0),
            ui_report("b", 1),
        ];
        let cfg = DevModelConfig {
            clusterer: Clusterer::KMeans { k: 2 },
            embedding: EmbeddingProvider::tfidf_lsa(1),
            reducer: Reducer::None,
            ..Default::default()
        };
        let model = fit_developer_model("dev", &reports, &cfg).unwrap();
        let score = score_document(&model, &crash_report("a", 0));
        assert!((score - 1.0).abs() < 1e-9, "score {score}");
    }

    #[test]
    fn score_zero_overlap_is_zero() {
        let reports: Vec<BugReport> = (0..10).map(|i| crash_report(&format!("c{i}"), i)).collect();
        let model = fit_developer_model("dev", &reports, &small_config()).unwrap();
        let mut probe = report("x", "entirely unrelated gardening topic", "plants", 3);
        probe.component = "greenhouse".to_string();
        probe.priority = 1;
        probe.severity = 1;
        // no shared words and no shared feature pseudo-tokens
        assert_eq!(score_document(&model, &probe), 0.0);
    }

    #[test]
    fn crash_developer_outscores_ui_developer() {
        let crash_reports: Vec<BugReport> =
            (0..40).map(|i| crash_report(&format!("c{i}"), i)).collect();
        let ui_reports: Vec<BugReport> = (0..40).map(|i| ui_report(&format!("u{i}"), i)).collect();
        let crash_model = fit_developer_model("crash-dev", &crash_reports, &small_config()).unwrap();
        let ui_model = fit_developer_model("ui-dev", &ui_reports, &small_config()).unwrap();
        let probe = crash_report("probe", 99);
        assert!(score_document(&crash_model, &probe) > score_document(&ui_model, &probe));
    }

    #[test]
    fn reduce_topics_to_target() {
        let reports: Vec<BugReport> = (0..24)
            .map(|i| {
                report(
                    &format!("r{i}"),
                    &format!("theme{} unique{} word{} token{}", i % 12, i, i % 12, i),
                    "prod",
                    i,
                )
            })
            .collect();
        let cfg = DevModelConfig {
            clusterer: Clusterer::KMeans { k: 12 },
            embedding: EmbeddingProvider::tfidf_lsa(8),
            reducer: Reducer::None,
            reduce_to: 10,
            ..Default::default()
        };
        let model = fit_developer_model("dev", &reports, &cfg).unwrap();
        assert!(model.representation.num_topics() <= 10);
        for &l in &model.clusters.labels {
            assert!((-1..10).contains(&l));
        }
    }

    #[test]
    fn reduce_topics_noop_when_at_target() {
        let reports: Vec<BugReport> = (0..20).map(|i| crash_report(&format!("c{i}"), i)).collect();
        let mut model = fit_developer_model("dev", &reports, &small_config()).unwrap();
        let before = model.representation.clone();
        reduce_topics(&mut model, 50, DEFAULT_TOP_N).unwrap();
        assert_eq!(before, model.representation);
    }

    #[test]
    fn duplicate_topics_merge_first() {
        // two identical crash groups plus one distinct ui group
        let mut reports = Vec::new();
        for i in 0..6 {
            let mut r = crash_report(&format!("a{i}"), i);
            r.title = "crash segfault panic".to_string();
            reports.push(r);
        }
        for i in 0..6 {
            let mut r = crash_report(&format!("b{i}"), 20 + i);
            r.title = "crash segfault panic".to_string();
            reports.push(r);
        }
        for i in 0..6 {
            reports.push(ui_report(&format!("u{i}"), 40 + i));
        }
        let cfg = DevModelConfig {
            clusterer: Clusterer::KMeans { k: 3 },
            embedding: EmbeddingProvider::tfidf_lsa(4),
            reducer: Reducer::None,
            ..Default::default()
        };
        let mut model = fit_developer_model("dev", &reports, &cfg).unwrap();
        if model.representation.num_topics() == 3 {
            reduce_topics(&mut model, 2, DEFAULT_TOP_N).unwrap();
            // the two identical crash topics merged; ui stays its own topic
            let sizes: Vec<usize> = model.representation.topics.iter().map(|t| t.size).collect();
            assert!(sizes.contains(&12));
        }
    }

    #[test]
    fn outlier_identical_to_cluster_member_joins_it() {
        let reports: Vec<BugReport> = (0..12).map(|i| crash_report(&format!("c{i}"), i)).collect();
        let mut model = fit_developer_model("dev", &reports, &small_config()).unwrap();
        // force the last document out, then reduce
        model.clusters.labels[11] = -1;
        model.representation = ctfidf_from_counts(
            &model.doc_terms,
            &model.clusters.labels,
            &model.vocab,
            DEFAULT_TOP_N,
        )
        .unwrap();
        reduce_outliers(&mut model, DEFAULT_OUTLIER_SIMILARITY, DEFAULT_TOP_N).unwrap();
        assert_ne!(model.clusters.labels[11], -1, "identical outlier must rejoin");
    }

    #[test]
    fn outlier_with_no_overlap_stays_outlier() {
        let mut reports: Vec<BugReport> =
            (0..12).map(|i| crash_report(&format!("c{i}"), i)).collect();
        let mut stray = report("stray", "meadow botany herbs flowers", "garden", 20);
        stray.component = "orchard".to_string();
        stray.priority = 1;
        stray.severity = 1;
        reports.push(stray);
        let mut model = fit_developer_model("dev", &reports, &small_config()).unwrap();
        let stray_idx = model.report_ids.iter().position(|id| id == "stray").unwrap();
        model.clusters.labels[stray_idx] = -1;
        model.representation = ctfidf_from_counts(
            &model.doc_terms,
            &model.clusters.labels,
            &model.vocab,
            DEFAULT_TOP_N,
        )
        .unwrap();
        reduce_outliers(&mut model, DEFAULT_OUTLIER_SIMILARITY, DEFAULT_TOP_N).unwrap();
        assert_eq!(model.clusters.labels[stray_idx], -1);
    }

    #[test]
    fn reduce_outliers_with_no_clusters_is_noop() {
        let reports: Vec<BugReport> = (0..8).map(|i| crash_report(&format!("c{i}"), i)).collect();
        let mut model = fit_developer_model("dev", &reports, &small_config()).unwrap();
        model.clusters.labels.iter_mut().for_each(|l| *l = -1);
        model.clusters.num_clusters = 0;
        let before = model.clusters.labels.clone();
        let applied = reduce_outliers(&mut model, DEFAULT_OUTLIER_SIMILARITY, DEFAULT_TOP_N).unwrap();
        assert!(!applied);
        assert_eq!(before, model.clusters.labels);
    }

    #[test]
    fn reduce_outliers_never_increases_outliers() {
        let reports: Vec<BugReport> = (0..40)
            .map(|i| {
                if i % 2 == 0 {
                    crash_report(&format!("c{i}"), i)
                } else {
                    ui_report(&format!("u{i}"), i)
                }
            })
            .collect();
        let mut model = fit_developer_model("dev", &reports, &small_config()).unwrap();
        let before = model.clusters.labels.iter().filter(|&&l| l == -1).count();
        reduce_outliers(&mut model, DEFAULT_OUTLIER_SIMILARITY, DEFAULT_TOP_N).unwrap();
        let after = model.clusters.labels.iter().filter(|&&l| l == -1).count();
        assert!(after <= before);
    }

    #[test]
    fn serialization_round_trip_scores_identically() {
        let reports: Vec<BugReport> = (0..30)
            .map(|i| {
                if i % 2 == 0 {
                    crash_report(&format!("c{i}"), i)
                } else {
                    ui_report(&format!("u{i}"), i)
                }
            })
            .collect();
        let model = fit_developer_model("dev", &reports, &small_config()).unwrap();
        let json = serde_json::to_string(&model).unwrap();
        let loaded: DeveloperTopicModel = serde_json::from_str(&json).unwrap();
        let probe = crash_report("p", 50);
        let a = score_document(&model, &probe);
        let b = score_document(&loaded, &probe);
        assert!((a - b).abs() < 1e-12);
    }
}
