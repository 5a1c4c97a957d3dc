//! Run configuration: a single JSON document, with every CLI flag
//! overriding its config key.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use bugtriage_core::corpus::{ColumnMap, Field, FilterConfig};
use bugtriage_core::devtopics::{Clusterer, DevModelConfig, EmbeddingProvider, Reducer};
use bugtriage_core::textprep::{
    default_stopwords, load_stopwords, CodeHandling, TokenPipelineConfig,
};
use bugtriage_core::triage::FilterFlags;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Mtm,
    PerDeveloper,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TokenizerSettings {
    pub lowercase: bool,
    pub strip_punctuation: bool,
    pub remove_numbers: bool,
    /// Plain-text file, one stopword per line; bundled list when absent.
    pub stopword_file: Option<PathBuf>,
    pub ngram_lo: usize,
    pub ngram_hi: usize,
    pub code_handling: CodeHandling,
    pub min_token_len: usize,
    pub min_df: usize,
    pub max_df_fraction: f64,
}

impl Default for TokenizerSettings {
    fn default() -> Self {
        TokenizerSettings {
            lowercase: true,
            strip_punctuation: true,
            remove_numbers: true,
            stopword_file: None,
            ngram_lo: 1,
            ngram_hi: 1,
            code_handling: CodeHandling::SplitIdentifiers,
            min_token_len: 2,
            min_df: 1,
            max_df_fraction: 1.0,
        }
    }
}

impl TokenizerSettings {
    pub fn pipeline(&self) -> anyhow::Result<TokenPipelineConfig> {
        let stopword_list = match &self.stopword_file {
            Some(path) => load_stopwords(path)
                .with_context(|| format!("reading stopword file {}", path.display()))?,
            None => default_stopwords(),
        };
        let cfg = TokenPipelineConfig {
            lowercase: self.lowercase,
            strip_punctuation: self.strip_punctuation,
            remove_numbers: self.remove_numbers,
            stopword_list,
            ngram_range: (self.ngram_lo, self.ngram_hi),
            code_handling: self.code_handling,
            min_token_len: self.min_token_len,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub dataset: Option<PathBuf>,
    /// CSV header -> canonical field name overrides.
    pub column_map: BTreeMap<String, String>,
    pub filter: FilterConfig,
    pub tokenizer: TokenizerSettings,
    pub backend: Backend,
    pub embedding: EmbeddingProvider,
    pub reducer: Reducer,
    pub clusterer: Clusterer,
    /// LDA topic count for the corpus-level backend.
    pub topics: usize,
    /// Defaults to 50 / topics when absent.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub fold_in_sweeps: usize,
    pub split_ratio: f64,
    pub k: usize,
    pub window_days: i64,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Defaults to `<out_dir>/models`.
    pub models_dir: Option<PathBuf>,
    pub online_update: bool,
    pub jobs: Option<usize>,
    /// Minimum training reports for a per-developer model; defaults to
    /// filter.min_fixed.
    pub model_min_reports: Option<usize>,
    pub refit_threshold: usize,
    pub small_model_threshold: usize,
    pub reduce_to_topics: usize,
    pub top_n_words: usize,
    pub filters_enabled: FilterFlags,
    pub project: String,
    pub baselines_file: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            dataset: None,
            column_map: BTreeMap::new(),
            filter: FilterConfig::default(),
            tokenizer: TokenizerSettings::default(),
            backend: Backend::PerDeveloper,
            embedding: EmbeddingProvider::tfidf_lsa(64),
            reducer: Reducer::Pca { dims: 5 },
            clusterer: Clusterer::Density {
                min_cluster_size: 5,
                min_samples: 5,
            },
            topics: 20,
            alpha: None,
            beta: 0.01,
            iterations: 500,
            fold_in_sweeps: 100,
            split_ratio: 0.8,
            k: 5,
            window_days: 90,
            seed: 42,
            out_dir: PathBuf::from("out"),
            models_dir: None,
            online_update: false,
            jobs: None,
            model_min_reports: None,
            refit_threshold: 25,
            small_model_threshold: 300,
            reduce_to_topics: 10,
            top_n_words: 10,
            filters_enabled: FilterFlags::default(),
            project: "project".to_string(),
            baselines_file: None,
        }
    }
}

fn parse_field(name: &str) -> anyhow::Result<Field> {
    let field = match name.to_lowercase().as_str() {
        "id" | "issue_id" => Field::Id,
        "product" => Field::Product,
        "component" => Field::Component,
        "title" | "summary" => Field::Title,
        "description" => Field::Description,
        "priority" => Field::Priority,
        "severity" => Field::Severity,
        "status" => Field::Status,
        "resolution" => Field::Resolution,
        "assignee" => Field::Assignee,
        "created_time" | "created" => Field::CreatedTime,
        "resolved_time" | "resolved" => Field::ResolvedTime,
        "comments" => Field::Comments,
        other => bail!("unknown canonical field `{other}` in column_map"),
    };
    Ok(field)
}

impl Config {
    pub fn load(path: &Path) -> anyhow::Result<Config> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: Config = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok(config)
    }

    /// The column map: canonical schema plus configured overrides.
    pub fn column_map(&self) -> anyhow::Result<ColumnMap> {
        let mut map = ColumnMap::default();
        for (header, field) in &self.column_map {
            map.0.insert(header.clone(), parse_field(field)?);
        }
        Ok(map)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.topics as f64)
    }

    pub fn models_dir(&self) -> PathBuf {
        self.models_dir
            .clone()
            .unwrap_or_else(|| self.out_dir.join("models"))
    }

    pub fn model_min_reports(&self) -> usize {
        self.model_min_reports.unwrap_or(self.filter.min_fixed)
    }

    pub fn dev_model_config(&self) -> anyhow::Result<DevModelConfig> {
        Ok(DevModelConfig {
            pipeline: self.tokenizer.pipeline()?,
            embedding: self.embedding.clone(),
            reducer: self.reducer.clone(),
            clusterer: self.clusterer.clone(),
            reduce_to: self.reduce_to_topics,
            small_model_threshold: self.small_model_threshold,
            min_reports: self.model_min_reports(),
            top_n_words: self.top_n_words,
            outlier_similarity: bugtriage_core::devtopics::DEFAULT_OUTLIER_SIMILARITY,
            seed: self.seed,
        })
    }

    /// Hash of the effective configuration, logged by every command.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&canonical);
        let mut hex = String::with_capacity(16);
        for byte in digest.iter().take(8) {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }
}

/// Global flag overrides shared by all subcommands.
#[derive(Debug, Clone, clap::Args)]
pub struct Overrides {
    /// Configuration file (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Train fraction of the chronological split, in (0,1).
    #[arg(long, global = true)]
    pub split: Option<f64>,
    #[arg(long = "min-fixed", global = true)]
    pub min_fixed: Option<usize>,
    #[arg(long = "window-days", global = true)]
    pub window_days: Option<i64>,
    /// density or kmeans.
    #[arg(long, global = true)]
    pub clusterer: Option<String>,
    /// pca or none.
    #[arg(long, global = true)]
    pub reducer: Option<String>,
    /// tfidf-lsa or file:PATH.
    #[arg(long, global = true)]
    pub embedding: Option<String>,
    #[arg(long, global = true)]
    pub topics: Option<usize>,
    #[arg(long, global = true)]
    pub iterations: Option<usize>,
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long = "online-update", global = true)]
    pub online_update: bool,
    #[arg(long, global = true)]
    pub backend: Option<Backend>,
    /// Output directory for all artifacts.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Dataset CSV path (ingest).
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
}

impl Overrides {
    pub fn effective_config(&self) -> anyhow::Result<Config> {
        let mut config = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(k) = self.k {
            config.k = k;
        }
        if let Some(split) = self.split {
            config.split_ratio = split;
        }
        if let Some(min_fixed) = self.min_fixed {
            config.filter.min_fixed = min_fixed;
        }
        if let Some(days) = self.window_days {
            config.window_days = days;
        }
        if let Some(clusterer) = &self.clusterer {
            config.clusterer = match clusterer.as_str() {
                "density" => Clusterer::Density {
                    min_cluster_size: 5,
                    min_samples: 5,
                },
                "kmeans" => Clusterer::KMeans { k: 8 },
                other => bail!("unknown clusterer `{other}` (density or kmeans)"),
            };
        }
        if let Some(reducer) = &self.reducer {
            config.reducer = match reducer.as_str() {
                "pca" => Reducer::Pca { dims: 5 },
                "none" => Reducer::None,
                other => bail!("unknown reducer `{other}` (pca or none)"),
            };
        }
        if let Some(embedding) = &self.embedding {
            config.embedding = if embedding == "tfidf-lsa" {
                EmbeddingProvider::tfidf_lsa(64)
            } else if let Some(path) = embedding.strip_prefix("file:") {
                EmbeddingProvider::ExternalFile {
                    path: PathBuf::from(path),
                }
            } else {
                bail!("unknown embedding `{embedding}` (tfidf-lsa or file:PATH)")
            };
        }
        if let Some(topics) = self.topics {
            config.topics = topics;
        }
        if let Some(iterations) = self.iterations {
            config.iterations = iterations;
        }
        if let Some(jobs) = self.jobs {
            config.jobs = Some(jobs);
        }
        if self.online_update {
            config.online_update = true;
        }
        if let Some(backend) = self.backend {
            config.backend = backend;
        }
        if let Some(out) = &self.out {
            config.out_dir = out.clone();
        }
        if let Some(data) = &self.data {
            config.dataset = Some(data.clone());
        }
        Ok(config)
    }
}
