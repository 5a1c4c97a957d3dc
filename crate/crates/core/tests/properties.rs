//! Property tests over the spec-level invariants that hold for arbitrary
//! inputs, not just fixtures.

use std::collections::HashMap;

use chrono::{TimeZone, Utc};
use proptest::prelude::*;

use bugtriage_core::corpus::{chronological_split, filter_corpus, BugReport, FilterConfig};
use bugtriage_core::textprep::{
    tfidf_matrix, to_bow, tokenize, TokenPipelineConfig, Vocabulary,
};

fn arbitrary_text() -> impl Strategy<Value = String> {
    proptest::collection::vec("[A-Za-z0-9_.#()]{1,12}", 0..20).prop_map(|words| words.join(" "))
}

fn report_strategy() -> impl Strategy<Value = BugReport> {
    (
        1u32..10_000,
        0i64..4000,
        1u8..=5,
        1u8..=7,
        0usize..6,
        prop::bool::ANY,
    )
        .prop_map(|(id, day, priority, severity, dev, fixed)| BugReport {
            id: format!("r{id}"),
            product: format!("prod{}", dev % 3),
            component: format!("comp{}", dev % 2),
            title: format!("title {id}"),
            description: String::new(),
            comments: vec![],
            priority,
            severity,
            status: "RESOLVED".to_string(),
            resolution: if fixed { "FIXED" } else { "WONTFIX" }.to_string(),
            assignee: format!("dev{dev}"),
            created_time: Utc.with_ymd_and_hms(2005, 1, 1, 0, 0, 0).unwrap()
                + chrono::Duration::days(day),
            resolved_time: None,
        })
}

fn dedupe_ids(mut reports: Vec<BugReport>) -> Vec<BugReport> {
    let mut seen = std::collections::HashSet::new();
    reports.retain(|r| seen.insert(r.id.clone()));
    reports
}

proptest! {
    #[test]
    fn tokenize_is_pure(text in arbitrary_text()) {
        let cfg = TokenPipelineConfig::default();
        prop_assert_eq!(tokenize(&text, &cfg), tokenize(&text, &cfg));
    }

    #[test]
    fn bow_counts_match_brute_force(texts in proptest::collection::vec(arbitrary_text(), 1..8)) {
        let cfg = TokenPipelineConfig::default();
        let docs: Vec<Vec<String>> = texts.iter().map(|t| tokenize(t, &cfg)).collect();
        if docs.iter().all(|d| d.is_empty()) {
            return Ok(());
        }
        let vocab = Vocabulary::build(&docs, 1, 1.0).unwrap();
        for doc in &docs {
            let bow = to_bow(doc, &vocab);
            let mut brute: HashMap<usize, u32> = HashMap::new();
            for t in doc {
                if let Some(i) = vocab.index(t) {
                    *brute.entry(i).or_insert(0) += 1;
                }
            }
            for &(t, c) in &bow.counts {
                prop_assert_eq!(brute.get(&t).copied().unwrap_or(0), c);
            }
            prop_assert_eq!(bow.counts.len(), brute.len());
        }
    }

    #[test]
    fn tfidf_rows_unit_norm_or_zero(texts in proptest::collection::vec(arbitrary_text(), 1..8)) {
        let cfg = TokenPipelineConfig::default();
        let docs: Vec<Vec<String>> = texts.iter().map(|t| tokenize(t, &cfg)).collect();
        if docs.iter().all(|d| d.is_empty()) {
            return Ok(());
        }
        let vocab = Vocabulary::build(&docs, 1, 1.0).unwrap();
        let bows: Vec<_> = docs.iter().map(|d| to_bow(d, &vocab)).collect();
        let matrix = tfidf_matrix(&bows, &vocab);
        for row in &matrix.rows {
            let norm: f64 = row.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt();
            if row.is_empty() {
                prop_assert_eq!(norm, 0.0);
            } else {
                prop_assert!((norm - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn split_respects_time_order(
        reports in proptest::collection::vec(report_strategy(), 1..60),
        ratio in 0.05f64..0.95,
    ) {
        let reports = dedupe_ids(reports);
        prop_assume!(!reports.is_empty());
        let (train, test) = chronological_split(&reports, ratio).unwrap();
        prop_assert_eq!(train.len() + test.len(), reports.len());
        let expected_train = ((ratio * reports.len() as f64).ceil() as usize).min(reports.len());
        prop_assert_eq!(train.len(), expected_train);
        if let (Some(last), Some(first)) = (train.last(), test.first()) {
            prop_assert!(last.created_time <= first.created_time);
        }
        for window in train.windows(2).chain(test.windows(2)) {
            prop_assert!(window[0].created_time <= window[1].created_time);
        }
    }

    #[test]
    fn filter_is_idempotent(
        reports in proptest::collection::vec(report_strategy(), 0..80),
        min_fixed in 1usize..6,
    ) {
        let reports = dedupe_ids(reports);
        let cfg = FilterConfig { min_fixed, ..Default::default() };
        let (kept, stats) = filter_corpus(&reports, &cfg).unwrap();
        let (kept2, stats2) = filter_corpus(&kept, &cfg).unwrap();
        prop_assert_eq!(&kept, &kept2);
        prop_assert!(stats.final_amount <= stats.amount);
        prop_assert!(stats.final_developers <= stats.developers);
        prop_assert_eq!(stats2.amount, kept.len());
        prop_assert!(stats.combinations <= stats.products * stats.components);
    }
}
