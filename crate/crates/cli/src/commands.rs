//! Subcommand implementations and the exit-code contract.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::Deserialize;

use bugtriage_core::corpus::{
    self, chronological_split, filter_corpus, parse_csv, priority_rank, severity_rank, BugReport,
};
use bugtriage_core::devtopics::fit_developer_model;
use bugtriage_core::error::Error as CoreError;
use bugtriage_core::eval::{self, load_baselines, report_table, runs_table, EvalConfig};
use bugtriage_core::lda::MtmModel;
use bugtriage_core::profiles::build_profiles;
use bugtriage_core::textprep::{to_bow, tokenize, Vocabulary};
use bugtriage_core::triage::{
    assign, recommend, ModelStore, MtmArtifact, RecommendationRequest, TriageState,
};

use crate::config::{Backend, Config};

/// Exit codes: 0 ok, 2 parse, 3 insufficient data, 4 missing artifacts,
/// 1 anything else.
#[derive(Debug)]
pub enum CliError {
    Parse(anyhow::Error),
    InsufficientData(String),
    MissingArtifacts(String),
    Other(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::InsufficientData(_) => 3,
            CliError::MissingArtifacts(_) => 4,
            CliError::Other(_) => 1,
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Parse(e) => format!("parse error: {e:#}"),
            CliError::InsufficientData(m) => format!("insufficient data: {m}"),
            CliError::MissingArtifacts(m) => format!("missing artifacts: {m}"),
            CliError::Other(e) => format!("{e:#}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Other(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn atomic_write(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn log_header(command: &str, config: &Config) {
    eprintln!(
        "[bugtriage] {command}: config={} seed={}",
        config.fingerprint(),
        config.seed
    );
}

fn corpus_cache_path(config: &Config) -> PathBuf {
    config.out_dir.join("corpus.csv")
}

fn state_path(config: &Config) -> PathBuf {
    config.out_dir.join("state.json")
}

fn load_cached_corpus(config: &Config) -> CliResult<Vec<BugReport>> {
    let path = corpus_cache_path(config);
    if !path.exists() {
        return Err(CliError::MissingArtifacts(format!(
            "no ingested corpus at {} (run `bugtriage ingest` first)",
            path.display()
        )));
    }
    let outcome = parse_csv(&path, &corpus::ColumnMap::default())
        .map_err(|e| CliError::Parse(anyhow!(e)))?;
    Ok(outcome.reports)
}

fn load_store(config: &Config) -> CliResult<ModelStore> {
    let dir = config.models_dir();
    ModelStore::load(&dir).map_err(|e| match e {
        CoreError::ModelStore(m) => CliError::MissingArtifacts(m),
        other => CliError::Other(anyhow!(other)),
    })
}

pub fn cmd_ingest(config: &Config) -> CliResult<()> {
    log_header("ingest", config);
    let dataset = config.dataset.clone().ok_or_else(|| {
        CliError::Parse(anyhow!("no dataset configured; pass --data or set `dataset`"))
    })?;
    let column_map = config.column_map().map_err(CliError::Parse)?;
    let outcome = parse_csv(&dataset, &column_map).map_err(|e| CliError::Parse(anyhow!(e)))?;
    let (kept, stats) =
        filter_corpus(&outcome.reports, &config.filter).map_err(|e| CliError::Other(anyhow!(e)))?;

    let mut corpus_csv = Vec::new();
    corpus::write_csv(&kept, &mut corpus_csv).map_err(|e| CliError::Other(anyhow!(e)))?;
    atomic_write(&corpus_cache_path(config), &corpus_csv)?;

    let mut rejects_csv = Vec::new();
    corpus::write_rejects(&outcome.rejects, &mut rejects_csv)
        .map_err(|e| CliError::Other(anyhow!(e)))?;
    atomic_write(&config.out_dir.join("rejects.csv"), &rejects_csv)?;

    let stats_json = serde_json::to_vec_pretty(&stats).map_err(|e| CliError::Other(anyhow!(e)))?;
    atomic_write(&config.out_dir.join("stats.json"), &stats_json)?;
    println!("{}", String::from_utf8_lossy(&stats_json));
    eprintln!(
        "[bugtriage] ingest: {} rows kept, {} rejected, stats written to {}",
        kept.len(),
        outcome.rejects.len(),
        config.out_dir.join("stats.json").display()
    );
    Ok(())
}

fn train_reports(config: &Config) -> CliResult<(Vec<BugReport>, Vec<BugReport>)> {
    let kept = load_cached_corpus(config)?;
    if kept.is_empty() {
        return Err(CliError::InsufficientData(
            "ingested corpus is empty after filtering".to_string(),
        ));
    }
    chronological_split(&kept, config.split_ratio).map_err(|e| CliError::Other(anyhow!(e)))
}

fn fit_per_developer_models(
    config: &Config,
    train: &[BugReport],
    only: Option<&std::collections::BTreeSet<String>>,
) -> CliResult<BTreeMap<String, bugtriage_core::DeveloperTopicModel>> {
    let dev_cfg = config.dev_model_config().map_err(CliError::Parse)?;
    let mut by_dev: BTreeMap<String, Vec<BugReport>> = BTreeMap::new();
    for r in train {
        by_dev.entry(r.assignee.clone()).or_default().push(r.clone());
    }
    let qualified: Vec<(String, Vec<BugReport>)> = by_dev
        .into_iter()
        .filter(|(dev, reports)| {
            reports.len() >= config.model_min_reports()
                && only.is_none_or(|set| set.contains(dev))
        })
        .collect();
    if qualified.is_empty() && only.is_none() {
        return Err(CliError::InsufficientData(format!(
            "no developer has at least {} training reports",
            config.model_min_reports()
        )));
    }

    let fit_one = |(dev, reports): &(String, Vec<BugReport>)| {
        let started = Instant::now();
        let mut cfg = dev_cfg.clone();
        cfg.seed = per_developer_seed(config.seed, dev);
        let model = fit_developer_model(dev, reports, &cfg)
            .map_err(|e| anyhow!(e).context(format!("fitting model for {dev}")))?;
        eprintln!(
            "[bugtriage] train: {dev}: {} reports, {} topics, {:?}",
            reports.len(),
            model.representation.num_topics(),
            started.elapsed()
        );
        Ok::<_, anyhow::Error>((dev.clone(), model))
    };

    let fitted: Result<Vec<_>, anyhow::Error> = match config.jobs {
        Some(jobs) if jobs > 1 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .map_err(|e| anyhow!(e))?;
            pool.install(|| qualified.par_iter().map(fit_one).collect())
        }
        _ => qualified.iter().map(fit_one).collect(),
    };
    Ok(fitted.map_err(CliError::Other)?.into_iter().collect())
}

fn per_developer_seed(seed: u64, developer: &str) -> u64 {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(developer.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    seed ^ u64::from_le_bytes(bytes)
}

fn train_mtm(config: &Config, train: &[BugReport]) -> CliResult<MtmArtifact> {
    let pipeline = config.tokenizer.pipeline().map_err(CliError::Parse)?;
    let token_lists: Vec<Vec<String>> = train
        .iter()
        .map(|r| tokenize(&r.text(), &pipeline))
        .collect();
    let vocab = Vocabulary::build(
        &token_lists,
        config.tokenizer.min_df,
        config.tokenizer.max_df_fraction,
    )
    .map_err(|e| CliError::InsufficientData(e.to_string()))?;
    let docs: Vec<Vec<u32>> = token_lists
        .iter()
        .map(|tokens| {
            let bow = to_bow(tokens, &vocab);
            // expand counts into a position sequence
            bow.counts
                .iter()
                .flat_map(|&(t, c)| std::iter::repeat_n(t as u32, c as usize))
                .collect()
        })
        .collect();
    let combos: Vec<_> = train.iter().map(|r| r.combination()).collect();
    let assignees: Vec<String> = train.iter().map(|r| r.assignee.clone()).collect();
    let started = Instant::now();
    let model = MtmModel::train(
        docs,
        &combos,
        &assignees,
        config.topics,
        vocab.len(),
        config.alpha(),
        config.beta,
        config.seed,
        config.iterations,
    )
    .map_err(|e| CliError::Other(anyhow!(e)))?;
    eprintln!(
        "[bugtriage] train: corpus model: {} topics, {} combinations, {:?}",
        config.topics,
        model.combo_index.len(),
        started.elapsed()
    );
    Ok(MtmArtifact {
        model,
        vocab,
        pipeline,
        fold_in_sweeps: config.fold_in_sweeps,
    })
}

pub fn cmd_train(config: &Config) -> CliResult<()> {
    log_header("train", config);
    let (train, _) = train_reports(config)?;

    // Stale models recorded by previous assignments refit now.
    let stale: Option<std::collections::BTreeSet<String>> = {
        let path = state_path(config);
        if path.exists() {
            let state: TriageState = serde_json::from_slice(
                &std::fs::read(&path).map_err(|e| CliError::Other(anyhow!(e)))?,
            )
            .map_err(|e| CliError::Other(anyhow!(e)))?;
            (!state.stale_models.is_empty()).then(|| state.stale_models.clone())
        } else {
            None
        }
    };

    let mut store = ModelStore::default();
    if matches!(config.backend, Backend::PerDeveloper | Backend::Both) {
        store.dev_models = fit_per_developer_models(config, &train, None)?;
    }
    if matches!(config.backend, Backend::Mtm | Backend::Both) {
        store.mtm = Some(train_mtm(config, &train)?);
    }
    store
        .save(&config.models_dir())
        .map_err(|e| CliError::Other(anyhow!(e)))?;
    eprintln!(
        "[bugtriage] train: {} developer models saved to {}",
        store.dev_models.len(),
        config.models_dir().display()
    );

    if let Some(stale) = stale {
        let path = state_path(config);
        let mut state: TriageState = serde_json::from_slice(
            &std::fs::read(&path).map_err(|e| CliError::Other(anyhow!(e)))?,
        )
        .map_err(|e| CliError::Other(anyhow!(e)))?;
        state.stale_models.clear();
        state.pending_refit.clear();
        atomic_write(
            &path,
            &serde_json::to_vec_pretty(&state).map_err(|e| CliError::Other(anyhow!(e)))?,
        )?;
        eprintln!(
            "[bugtriage] train: refit cleared {} stale model marker(s)",
            stale.len()
        );
    }
    Ok(())
}

/// Report fields accepted from a JSON file or flags.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
pub struct ReportInput {
    pub id: Option<String>,
    pub product: Option<String>,
    pub component: Option<String>,
    pub title: Option<String>,
    pub description: Option<String>,
    pub comments: Vec<String>,
    pub priority: Option<String>,
    pub severity: Option<String>,
    pub created_time: Option<String>,
}

impl ReportInput {
    pub fn merge_flags(mut self, flags: &crate::ReportFlags) -> Self {
        if flags.id.is_some() {
            self.id = flags.id.clone();
        }
        if flags.title.is_some() {
            self.title = flags.title.clone();
        }
        if flags.description.is_some() {
            self.description = flags.description.clone();
        }
        if flags.product.is_some() {
            self.product = flags.product.clone();
        }
        if flags.component.is_some() {
            self.component = flags.component.clone();
        }
        if flags.priority.is_some() {
            self.priority = flags.priority.clone();
        }
        if flags.severity.is_some() {
            self.severity = flags.severity.clone();
        }
        if flags.created.is_some() {
            self.created_time = flags.created.clone();
        }
        self
    }

    pub fn into_report(self, fallback_time: DateTime<Utc>) -> anyhow::Result<BugReport> {
        let created_time = match &self.created_time {
            Some(text) => parse_time(text)?,
            None => fallback_time,
        };
        Ok(BugReport {
            id: self.id.unwrap_or_else(|| "adhoc".to_string()),
            product: self.product.unwrap_or_default(),
            component: self.component.unwrap_or_default(),
            title: self.title.unwrap_or_default(),
            description: self.description.unwrap_or_default(),
            comments: self.comments,
            priority: priority_rank(self.priority.as_deref().unwrap_or("")),
            severity: severity_rank(self.severity.as_deref().unwrap_or("")),
            status: "NEW".to_string(),
            resolution: String::new(),
            assignee: String::new(),
            created_time,
            resolved_time: None,
        })
    }
}

fn parse_time(text: &str) -> anyhow::Result<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(text) {
        return Ok(t.with_timezone(&Utc));
    }
    let naive = chrono::NaiveDateTime::parse_from_str(text, "%Y-%m-%d %H:%M:%S")
        .with_context(|| format!("cannot parse timestamp `{text}`"))?;
    Ok(naive.and_utc())
}

fn load_or_build_state(config: &Config, train: &[BugReport]) -> CliResult<TriageState> {
    let path = state_path(config);
    if path.exists() {
        let state = serde_json::from_slice(
            &std::fs::read(&path).map_err(|e| CliError::Other(anyhow!(e)))?,
        )
        .map_err(|e| CliError::Other(anyhow!(e)))?;
        return Ok(state);
    }
    Ok(TriageState::new(
        build_profiles(train),
        config.refit_threshold,
    ))
}

pub fn cmd_recommend(config: &Config, input: ReportInput) -> CliResult<()> {
    log_header("recommend", config);
    let store = load_store(config)?;
    let (train, _) = train_reports(config)?;
    let state = load_or_build_state(config, &train)?;

    let fallback_time = train
        .iter()
        .map(|r| r.created_time)
        .max()
        .unwrap_or_else(Utc::now);
    let report = input.into_report(fallback_time).map_err(CliError::Parse)?;
    let request = RecommendationRequest {
        report,
        k: config.k,
        as_of: None,
        filters: config.filters_enabled,
    };
    let result = recommend(&request, &state.profiles, &store, config.window_days)
        .map_err(|e| CliError::Other(anyhow!(e)))?;
    let json = serde_json::to_vec_pretty(&result).map_err(|e| CliError::Other(anyhow!(e)))?;
    atomic_write(&config.out_dir.join("recommendation.json"), &json)?;
    println!("{}", String::from_utf8_lossy(&json));
    Ok(())
}

pub fn cmd_evaluate(config: &Config) -> CliResult<()> {
    log_header("evaluate", config);
    let store = load_store(config)?;
    let (train, test) = train_reports(config)?;
    if test.is_empty() {
        return Err(CliError::InsufficientData(
            "chronological split produced an empty test set".to_string(),
        ));
    }

    let eval_cfg = EvalConfig {
        project: config.project.clone(),
        split_ratio: config.split_ratio,
        k: config.k,
        window_days: config.window_days,
        filters: config.filters_enabled,
        online_update: config.online_update,
    };
    let run = eval::evaluate(&train, &test, &store, &eval_cfg).map_err(|e| match e {
        CoreError::EmptyEvaluation => CliError::InsufficientData(e.to_string()),
        other => CliError::Other(anyhow!(other)),
    })?;
    let max_train = train.iter().map(|r| r.created_time).max();
    eprintln!(
        "[bugtriage] evaluate: leakage audit ok: max train time {:?} <= first test time {:?}",
        max_train,
        test.iter().map(|r| r.created_time).min()
    );

    atomic_write(
        &config.out_dir.join("eval_run.json"),
        &serde_json::to_vec_pretty(&run).map_err(|e| CliError::Other(anyhow!(e)))?,
    )?;

    let (md, csv_text) = runs_table(std::slice::from_ref(&run));
    atomic_write(&config.out_dir.join("topk_table.md"), md.as_bytes())?;
    atomic_write(&config.out_dir.join("topk_table.csv"), csv_text.as_bytes())?;

    let baselines = match &config.baselines_file {
        Some(path) => {
            let file = std::fs::File::open(path)
                .with_context(|| format!("opening baselines {}", path.display()))
                .map_err(CliError::Other)?;
            load_baselines(file).map_err(|e| CliError::Other(anyhow!(e)))?
        }
        None => Vec::new(),
    };
    for k in [1, config.k] {
        let (md, csv_text) = report_table(std::slice::from_ref(&run), &baselines, k);
        atomic_write(
            &config.out_dir.join(format!("comparison_top{k}.md")),
            md.as_bytes(),
        )?;
        atomic_write(
            &config.out_dir.join(format!("comparison_top{k}.csv")),
            csv_text.as_bytes(),
        )?;
    }

    println!(
        "{}",
        serde_json::to_string_pretty(&run.metrics).map_err(|e| CliError::Other(anyhow!(e)))?
    );
    eprintln!(
        "[bugtriage] evaluate: {} test reports in {:?}",
        run.records.len(),
        run.duration
    );
    Ok(())
}

pub fn cmd_assign(
    config: &Config,
    report_id: Option<String>,
    input: Option<ReportInput>,
    developer: &str,
) -> CliResult<()> {
    log_header("assign", config);
    let (train, test) = train_reports(config)?;
    let mut state = load_or_build_state(config, &train)?;
    let mut store = load_store(config).unwrap_or_default();

    let report = match (report_id, input) {
        (Some(id), _) => train
            .iter()
            .chain(test.iter())
            .find(|r| r.id == id)
            .cloned()
            .ok_or_else(|| {
                CliError::Other(anyhow!("report `{id}` not found in the ingested corpus"))
            })?,
        (None, Some(input)) => {
            let fallback = train
                .iter()
                .map(|r| r.created_time)
                .max()
                .unwrap_or_else(Utc::now);
            input.into_report(fallback).map_err(CliError::Parse)?
        }
        (None, None) => {
            return Err(CliError::Parse(anyhow!(
                "assign needs --report-id or --report-json"
            )))
        }
    };

    assign(&report, developer, &mut state, &mut store);
    atomic_write(
        &state_path(config),
        &serde_json::to_vec_pretty(&state).map_err(|e| CliError::Other(anyhow!(e)))?,
    )?;
    if store.mtm.is_some() {
        store
            .save(&config.models_dir())
            .map_err(|e| CliError::Other(anyhow!(e)))?;
    }

    let profile = &state.profiles[developer];
    let summary = serde_json::json!({
        "developer": developer,
        "amount_of_bugs": profile.amount_of_bugs,
        "top_bug": profile.top_bug,
        "last_active": profile.last_active,
        "pending_refit": state.pending_refit.get(developer).copied().unwrap_or(0),
        "model_stale": state.stale_models.contains(developer),
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).map_err(|e| CliError::Other(anyhow!(e)))?
    );
    Ok(())
}
