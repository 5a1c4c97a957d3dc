//! The recommendation engine: candidate filtering by date, priority, and
//! severity, per-developer model scoring, Top-K ranking with an
//! activity-based tie-break, and the assignment update path.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::BugReport;
use crate::devtopics::{score_document, DeveloperTopicModel};
use crate::error::{Error, Result};
use crate::lda::MtmModel;
use crate::profiles::{DeveloperProfile, DEFAULT_WINDOW_DAYS};
use crate::textprep::{tokenize, TokenPipelineConfig, Vocabulary};

/// Two scores within this distance are an "even split" and fall through to
/// the activity tie-break.
pub const SCORE_TIE_EPSILON: f64 = 1e-6;
pub const DEFAULT_REFIT_THRESHOLD: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterFlags {
    pub date: bool,
    pub priority: bool,
    pub severity: bool,
}

impl Default for FilterFlags {
    fn default() -> Self {
        FilterFlags {
            date: true,
            priority: true,
            severity: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RecommendationRequest {
    pub report: BugReport,
    pub k: usize,
    /// Defaults to the report's creation time.
    pub as_of: Option<DateTime<Utc>>,
    pub filters: FilterFlags,
}

impl RecommendationRequest {
    pub fn new(report: BugReport, k: usize) -> Self {
        RecommendationRequest {
            report,
            k,
            as_of: None,
            filters: FilterFlags::default(),
        }
    }

    pub fn as_of(&self) -> DateTime<Utc> {
        self.as_of.unwrap_or(self.report.created_time)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedDeveloper {
    pub developer: String,
    pub score: f64,
    pub last_active: Option<DateTime<Utc>>,
    pub tie_break_used: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationResult {
    pub report_id: String,
    pub as_of: DateTime<Utc>,
    pub k: usize,
    pub results: Vec<RankedDeveloper>,
    pub pool_size: usize,
    /// 0 = filters as requested, 1 = doubled activity window, 2 = everyone.
    pub fallback_level: u8,
    pub filters_applied: FilterFlags,
}

/// Corpus-level model artifact: the trained model plus the text context
/// needed to map new reports into it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MtmArtifact {
    pub model: MtmModel,
    pub vocab: Vocabulary,
    pub pipeline: TokenPipelineConfig,
    pub fold_in_sweeps: usize,
}

impl MtmArtifact {
    pub fn report_indices(&self, report: &BugReport) -> Vec<u32> {
        tokenize(&report.text(), &self.pipeline)
            .iter()
            .filter_map(|t| self.vocab.index(t))
            .map(|i| i as u32)
            .collect()
    }

    /// Scores every developer the model knows for this report.
    pub fn score_all(&self, report: &BugReport) -> Result<BTreeMap<String, f64>> {
        let indices = self.report_indices(report);
        let ranked = self.model.recommend(
            &indices,
            Some(&report.combination()),
            usize::MAX,
            self.fold_in_sweeps,
        )?;
        Ok(ranked.into_iter().collect())
    }
}

/// Trained artifacts available to the recommender.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ModelStore {
    pub dev_models: BTreeMap<String, DeveloperTopicModel>,
    pub mtm: Option<MtmArtifact>,
}

/// Index entry describing one saved developer model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelIndexEntry {
    pub id: String,
    pub file: String,
    pub report_count: usize,
    pub topic_count: usize,
    pub date_range: (DateTime<Utc>, DateTime<Utc>),
}

fn model_file_name(developer: &str) -> String {
    let sanitized: String = developer
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '_' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if sanitized == developer {
        format!("{sanitized}.model")
    } else {
        let digest = Sha256::digest(developer.as_bytes());
        format!("{sanitized}-{:02x}{:02x}{:02x}{:02x}.model", digest[0], digest[1], digest[2], digest[3])
    }
}

impl ModelStore {
    /// Writes one `<developer>.model` file per developer, an `index.json`,
    /// and `mtm.json` when configured.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut index = Vec::new();
        for (dev, model) in &self.dev_models {
            let file = model_file_name(dev);
            std::fs::write(dir.join(&file), serde_json::to_vec_pretty(model)?)?;
            index.push(ModelIndexEntry {
                id: dev.clone(),
                file,
                report_count: model.report_ids.len(),
                topic_count: model.representation.num_topics(),
                date_range: model.date_range,
            });
        }
        std::fs::write(dir.join("index.json"), serde_json::to_vec_pretty(&index)?)?;
        if let Some(mtm) = &self.mtm {
            std::fs::write(dir.join("mtm.json"), serde_json::to_vec_pretty(mtm)?)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<ModelStore> {
        let index_path = dir.join("index.json");
        if !index_path.exists() {
            return Err(Error::ModelStore(format!(
                "no model index at {}",
                index_path.display()
            )));
        }
        let index: Vec<ModelIndexEntry> =
            serde_json::from_slice(&std::fs::read(&index_path)?)?;
        let mut dev_models = BTreeMap::new();
        for entry in index {
            let model: DeveloperTopicModel =
                serde_json::from_slice(&std::fs::read(dir.join(&entry.file))?)?;
            dev_models.insert(entry.id, model);
        }
        let mtm_path = dir.join("mtm.json");
        let mtm = if mtm_path.exists() {
            Some(serde_json::from_slice(&std::fs::read(&mtm_path)?)?)
        } else {
            None
        };
        Ok(ModelStore { dev_models, mtm })
    }
}

/// Applies the enabled filters, falling back first to a doubled activity
/// window and then to all developers so the pool is never empty.
pub fn filter_candidates(
    profiles: &BTreeMap<String, DeveloperProfile>,
    request: &RecommendationRequest,
    window_days: i64,
) -> (Vec<String>, u8) {
    let as_of = request.as_of();
    let f = request.filters;
    let level0: Vec<String> = profiles
        .values()
        .filter(|p| {
            (!f.date || p.is_active(as_of, window_days))
                && (!f.priority || p.priority_experience(request.report.priority) >= 1)
                && (!f.severity || p.severity_experience(request.report.severity) >= 1)
        })
        .map(|p| p.name.clone())
        .collect();
    if !level0.is_empty() {
        return (level0, 0);
    }
    let level1: Vec<String> = profiles
        .values()
        .filter(|p| p.is_active(as_of, window_days * 2))
        .map(|p| p.name.clone())
        .collect();
    if !level1.is_empty() {
        return (level1, 1);
    }
    (profiles.keys().cloned().collect(), 2)
}

/// Scores each candidate: its fitted model when one exists, otherwise the
/// corpus-level model's score when configured, otherwise 0.
pub fn score_candidates(
    candidates: &[String],
    report: &BugReport,
    store: &ModelStore,
) -> Result<BTreeMap<String, f64>> {
    let mtm_scores = match &store.mtm {
        Some(artifact) if candidates.iter().any(|c| !store.dev_models.contains_key(c)) => {
            Some(artifact.score_all(report)?)
        }
        _ => None,
    };
    let mut out = BTreeMap::new();
    for dev in candidates {
        let score = match store.dev_models.get(dev) {
            Some(model) => score_document(model, report),
            None => mtm_scores
                .as_ref()
                .and_then(|m| m.get(dev).copied())
                .unwrap_or(0.0),
        };
        out.insert(dev.clone(), score);
    }
    Ok(out)
}

/// Produces the Top-K recommendation: filter, score, sort descending by
/// score; within an even split (scores closer than 1e-6) the more recently
/// active developer wins, then lexicographic id.
pub fn recommend(
    request: &RecommendationRequest,
    profiles: &BTreeMap<String, DeveloperProfile>,
    store: &ModelStore,
    window_days: i64,
) -> Result<RecommendationResult> {
    if profiles.is_empty() {
        return Err(Error::NoDevelopers);
    }
    let as_of = request.as_of();
    let (candidates, fallback_level) = filter_candidates(profiles, request, window_days);
    let scores = score_candidates(&candidates, &request.report, store)?;

    let mut ranked: Vec<RankedDeveloper> = candidates
        .iter()
        .map(|dev| RankedDeveloper {
            developer: dev.clone(),
            score: scores[dev],
            last_active: profiles[dev].last_active_before(as_of),
            tie_break_used: false,
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then_with(|| a.developer.cmp(&b.developer))
    });

    // Reorder inside chains of even-split scores by recency of activity.
    let mut i = 0;
    while i < ranked.len() {
        let mut j = i + 1;
        while j < ranked.len() && (ranked[j - 1].score - ranked[j].score).abs() < SCORE_TIE_EPSILON
        {
            j += 1;
        }
        if j - i > 1 {
            let chain = &mut ranked[i..j];
            chain.sort_by(|a, b| {
                b.last_active
                    .cmp(&a.last_active)
                    .then_with(|| a.developer.cmp(&b.developer))
            });
            for entry in chain.iter_mut() {
                entry.tie_break_used = true;
            }
        }
        i = j;
    }

    let pool_size = candidates.len();
    ranked.truncate(request.k);
    Ok(RecommendationResult {
        report_id: request.report.id.clone(),
        as_of,
        k: request.k,
        results: ranked,
        pool_size,
        fallback_level,
        filters_applied: request.filters,
    })
}

/// Mutable triage state: profiles plus bookkeeping for deferred refits.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TriageState {
    pub profiles: BTreeMap<String, DeveloperProfile>,
    pub pending_refit: BTreeMap<String, usize>,
    pub stale_models: BTreeSet<String>,
    pub refit_threshold: usize,
}

impl TriageState {
    pub fn new(profiles: BTreeMap<String, DeveloperProfile>, refit_threshold: usize) -> Self {
        TriageState {
            profiles,
            pending_refit: BTreeMap::new(),
            stale_models: BTreeSet::new(),
            refit_threshold,
        }
    }
}

/// Applies an accepted assignment: the developer's profile gains the
/// report, the corpus-level model is updated when configured, and the
/// developer's model is marked stale once enough assignments are pending.
/// Refits happen on the next train run, not here.
pub fn assign(
    report: &BugReport,
    developer: &str,
    state: &mut TriageState,
    store: &mut ModelStore,
) {
    let assigned = with_assignee(report, developer);
    match state.profiles.get_mut(developer) {
        Some(profile) => {
            if profile.bug_list.iter().all(|b| b.report_id != report.id) {
                profile.add_report(&assigned);
            }
        }
        None => {
            let mut fresh = crate::profiles::build_profiles(std::slice::from_ref(&assigned));
            state
                .profiles
                .insert(developer.to_string(), fresh.remove(developer).unwrap());
        }
    }

    if let Some(artifact) = &mut store.mtm {
        let indices = tokenize(&report.text(), &artifact.pipeline)
            .iter()
            .filter_map(|t| artifact.vocab.index(t))
            .map(|i| i as u32)
            .collect::<Vec<u32>>();
        let sweeps = artifact.fold_in_sweeps;
        artifact
            .model
            .update(&indices, &report.combination(), developer, sweeps);
    }

    let pending = state
        .pending_refit
        .entry(developer.to_string())
        .or_insert(0);
    *pending += 1;
    if *pending >= state.refit_threshold {
        state.stale_models.insert(developer.to_string());
    }
}

fn with_assignee(report: &BugReport, developer: &str) -> BugReport {
    let mut r = report.clone();
    r.assignee = developer.to_string();
    r
}

pub fn default_window_days() -> i64 {
    DEFAULT_WINDOW_DAYS
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::devtopics::{fit_developer_model, Clusterer, DevModelConfig, EmbeddingProvider, Reducer};
    use crate::profiles::build_profiles;
    use chrono::TimeZone;

    fn ts(y: i32, m: u32, d: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(y, m, d, 0, 0, 0).unwrap()
    }

    fn report(id: &str, dev: &str, title: &str, created: DateTime<Utc>) -> BugReport {
        BugReport {
            id: id.to_string(),
            product: "prod".to_string(),
            component: "comp".to_string(),
            title: title.to_string(),
            description: String::new(),
            comments: vec![],
            priority: 3,
            severity: 4,
            status: "RESOLVED".to_string(),
            resolution: "FIXED".to_string(),
            assignee: dev.to_string(),
            created_time: created,
            resolved_time: None,
        }
    }

    fn small_config() -> DevModelConfig {
        DevModelConfig {
            embedding: EmbeddingProvider::tfidf_lsa(8),
            reducer: Reducer::Pca { dims: 3 },
            clusterer: Clusterer::KMeans { k: 2 },
            ..Default::default()
        }
    }

    fn crash_title(i: usize) -> String {
        format!("segfault crash panic backtrace kernel marker{}", i % 3)
    }

    fn ui_title(i: usize) -> String {
        format!("window layout widget toolbar render marker{}", i % 3)
    }

    fn fixture() -> (
        BTreeMap<String, DeveloperProfile>,
        ModelStore,
        Vec<BugReport>,
    ) {
        let mut reports = Vec::new();
        for i in 0..30 {
            reports.push(report(
                &format!("c{i}"),
                "crash-dev",
                &crash_title(i),
                ts(2012, 1, 1) + chrono::Duration::days(i as i64),
            ));
            reports.push(report(
                &format!("u{i}"),
                "ui-dev",
                &ui_title(i),
                ts(2012, 1, 1) + chrono::Duration::days(i as i64),
            ));
        }
        let profiles = build_profiles(&reports);
        let mut store = ModelStore::default();
        for dev in ["crash-dev", "ui-dev"] {
            let dev_reports: Vec<BugReport> = reports
                .iter()
                .filter(|r| r.assignee == dev)
                .cloned()
                .collect();
            store.dev_models.insert(
                dev.to_string(),
                fit_developer_model(dev, &dev_reports, &small_config()).unwrap(),
            );
        }
        (profiles, store, reports)
    }

    #[test]
    fn filter_keeps_active_experienced_developer() {
        let (profiles, _, _) = fixture();
        let probe = report("p", "", &crash_title(0), ts(2012, 2, 10));
        let request = RecommendationRequest::new(probe, 5);
        let (pool, level) = filter_candidates(&profiles, &request, 90);
        assert_eq!(level, 0);
        assert_eq!(pool.len(), 2);
    }

    #[test]
    fn filter_excludes_stale_developer() {
        let (profiles, _, _) = fixture();
        // two years later, nobody is active within 90 days; fallback widens
        let probe = report("p", "", &crash_title(0), ts(2014, 2, 10));
        let request = RecommendationRequest::new(probe, 5);
        let (pool, level) = filter_candidates(&profiles, &request, 90);
        assert_eq!(level, 2);
        assert_eq!(pool.len(), 2);
    }

    #[test]
    fn filter_excludes_only_the_inactive_developer() {
        let mut reports = vec![report("old", "dormant", "ancient fix", ts(2011, 1, 5))];
        reports.extend((0..3).map(|i| {
            report(
                &format!("f{i}"),
                "fresh",
                "recent fix",
                ts(2013, 1, 1) + chrono::Duration::days(i as i64),
            )
        }));
        let profiles = build_profiles(&reports);
        let probe = report("p", "", "anything", ts(2013, 1, 10));
        let request = RecommendationRequest::new(probe, 5);
        let (pool, level) = filter_candidates(&profiles, &request, 90);
        assert_eq!(level, 0);
        assert_eq!(pool, vec!["fresh".to_string()]);
    }

    #[test]
    fn fallback_is_flagged_and_non_empty() {
        let (profiles, _, _) = fixture();
        let mut probe = report("p", "", &crash_title(0), ts(2012, 6, 1));
        probe.priority = 1; // nobody fixed a P1: level-0 pool empty
        let request = RecommendationRequest::new(probe, 5);
        let (pool, level) = filter_candidates(&profiles, &request, 90);
        assert!(level >= 1);
        assert!(!pool.is_empty());
    }

    #[test]
    fn recommend_prefers_matching_vocabulary() {
        let (profiles, store, _) = fixture();
        let probe = report("p", "", &crash_title(1), ts(2012, 2, 10));
        let request = RecommendationRequest::new(probe, 5);
        let got = recommend(&request, &profiles, &store, 90).unwrap();
        assert_eq!(got.results[0].developer, "crash-dev");
        assert!(got.results[0].score > got.results[1].score);
    }

    #[test]
    fn recommend_single_candidate() {
        let reports = vec![report("1", "only", "lonely fix", ts(2012, 1, 1))];
        let profiles = build_profiles(&reports);
        let store = ModelStore::default();
        let request = RecommendationRequest::new(
            report("p", "", "anything", ts(2012, 1, 2)),
            5,
        );
        let got = recommend(&request, &profiles, &store, 90).unwrap();
        assert_eq!(got.results.len(), 1);
        assert_eq!(got.results[0].developer, "only");
    }

    #[test]
    fn recommend_clamps_k() {
        let (profiles, store, _) = fixture();
        let probe = report("p", "", &crash_title(0), ts(2012, 2, 10));
        let request = RecommendationRequest::new(probe, 5);
        let got = recommend(&request, &profiles, &store, 90).unwrap();
        assert_eq!(got.results.len(), 2);
    }

    #[test]
    fn tie_break_prefers_recent_activity() {
        // identical training corpora produce identical scores
        let mut reports = Vec::new();
        for i in 0..12 {
            reports.push(report(
                &format!("r{i}"),
                "recent",
                &crash_title(i),
                ts(2012, 12, 1) + chrono::Duration::days(i as i64),
            ));
            reports.push(report(
                &format!("s{i}"),
                "stale",
                &crash_title(i),
                ts(2012, 10, 1) + chrono::Duration::days(i as i64),
            ));
        }
        let profiles = build_profiles(&reports);
        let mut store = ModelStore::default();
        for dev in ["recent", "stale"] {
            let dev_reports: Vec<BugReport> = reports
                .iter()
                .filter(|r| r.assignee == dev)
                .cloned()
                .collect();
            store.dev_models.insert(
                dev.to_string(),
                fit_developer_model(dev, &dev_reports, &small_config()).unwrap(),
            );
        }
        let probe = report("p", "", &crash_title(0), ts(2013, 1, 10));
        let request = RecommendationRequest::new(probe, 5);
        let got = recommend(&request, &profiles, &store, 90).unwrap();
        assert!((got.results[0].score - got.results[1].score).abs() < SCORE_TIE_EPSILON);
        assert_eq!(got.results[0].developer, "recent");
        assert!(got.results[0].tie_break_used);
        assert!(got.results[1].tie_break_used);
    }

    #[test]
    fn result_ordering_invariant() {
        let (profiles, store, _) = fixture();
        let probe = report("p", "", "segfault layout marker0", ts(2012, 2, 10));
        let request = RecommendationRequest::new(probe, 5);
        let got = recommend(&request, &profiles, &store, 90).unwrap();
        for pair in got.results.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            let ordered = a.score > b.score + SCORE_TIE_EPSILON
                || ((a.score - b.score).abs() < SCORE_TIE_EPSILON
                    && (a.last_active > b.last_active
                        || (a.last_active == b.last_active && a.developer < b.developer)));
            assert!(ordered, "violated between {a:?} and {b:?}");
        }
    }

    #[test]
    fn top1_of_k1_matches_k5() {
        let (profiles, store, _) = fixture();
        let probe = report("p", "", &crash_title(2), ts(2012, 2, 10));
        let mut request = RecommendationRequest::new(probe, 5);
        let got5 = recommend(&request, &profiles, &store, 90).unwrap();
        request.k = 1;
        let got1 = recommend(&request, &profiles, &store, 90).unwrap();
        assert_eq!(got1.results[0].developer, got5.results[0].developer);
    }

    #[test]
    fn assign_updates_profile_and_marks_stale() {
        let (profiles, mut store, _) = fixture();
        let mut state = TriageState::new(profiles, 25);
        let before = state.profiles["crash-dev"].amount_of_bugs;
        for i in 0..25 {
            let r = report(
                &format!("new{i}"),
                "",
                &crash_title(i),
                ts(2012, 3, 1) + chrono::Duration::days(i as i64),
            );
            assign(&r, "crash-dev", &mut state, &mut store);
        }
        assert_eq!(state.profiles["crash-dev"].amount_of_bugs, before + 25);
        assert!(state.stale_models.contains("crash-dev"));
        assert!(!state.stale_models.contains("ui-dev"));
    }

    #[test]
    fn rank_improves_after_refit_on_assigned_reports() {
        let (profiles, mut store, reports) = fixture();
        let probe = report("p", "", &crash_title(0), ts(2012, 2, 10));
        let rank_of = |store: &ModelStore, profiles: &BTreeMap<String, DeveloperProfile>| {
            let request = RecommendationRequest::new(probe.clone(), 5);
            recommend(&request, profiles, store, 90)
                .unwrap()
                .results
                .iter()
                .position(|r| r.developer == "ui-dev")
                .unwrap()
        };
        let before = rank_of(&store, &profiles);

        // ui-dev takes over crash work; the refit folds those reports in
        let mut ui_reports: Vec<BugReport> = reports
            .iter()
            .filter(|r| r.assignee == "ui-dev")
            .cloned()
            .collect();
        for i in 0..30 {
            ui_reports.push(report(
                &format!("x{i}"),
                "ui-dev",
                &crash_title(i),
                ts(2012, 2, 1) + chrono::Duration::days(i as i64),
            ));
        }
        store.dev_models.insert(
            "ui-dev".to_string(),
            fit_developer_model("ui-dev", &ui_reports, &small_config()).unwrap(),
        );
        let profiles = build_profiles(
            &reports
                .iter()
                .cloned()
                .chain(ui_reports.iter().filter(|r| r.id.starts_with('x')).cloned())
                .collect::<Vec<_>>(),
        );
        let after = rank_of(&store, &profiles);
        assert!(after <= before, "rank worsened: {before} -> {after}");
    }

    #[test]
    fn assign_unknown_developer_creates_profile() {
        let (profiles, mut store, _) = fixture();
        let mut state = TriageState::new(profiles, 25);
        let r = report("n1", "", "fresh face fix", ts(2012, 3, 1));
        assign(&r, "newcomer", &mut state, &mut store);
        assert_eq!(state.profiles["newcomer"].amount_of_bugs, 1);
    }

    #[test]
    fn model_store_round_trip() {
        let (_, store, _) = fixture();
        let dir = tempfile::tempdir().unwrap();
        store.save(dir.path()).unwrap();
        let loaded = ModelStore::load(dir.path()).unwrap();
        assert_eq!(store.dev_models.len(), loaded.dev_models.len());
        let probe = report("p", "", &crash_title(0), ts(2012, 2, 10));
        for (dev, model) in &store.dev_models {
            let a = score_document(model, &probe);
            let b = score_document(&loaded.dev_models[dev], &probe);
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn model_file_names_are_safe() {
        assert_eq!(model_file_name("alice"), "alice.model");
        let tricky = model_file_name("dev <x>@example.org");
        assert!(tricky.ends_with(".model"));
        assert!(!tricky.contains(' ') && !tricky.contains('@') && !tricky.contains('<'));
        assert_ne!(model_file_name("a/b"), model_file_name("a_b"));
    }
}
