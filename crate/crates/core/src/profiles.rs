//! Developer experience profiles: fixed-bug ledgers, combination and
//! priority/severity histograms, and activity intervals.

use std::collections::BTreeMap;

use chrono::{DateTime, Datelike, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::{BugReport, Combination};

pub const DEFAULT_WINDOW_DAYS: i64 = 90;

/// One fixed bug in a profile's ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BugEntry {
    pub report_id: String,
    pub created_time: DateTime<Utc>,
    pub combination: Combination,
    pub priority: u8,
    pub severity: u8,
    /// Per-bug weight; 1.0 today, a hook for recency decay.
    pub weight: f64,
}

/// Aggregated experience record for one developer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeveloperProfile {
    pub name: String,
    pub bug_list: Vec<BugEntry>,
    pub amount_of_bugs: usize,
    /// Combination with the highest count; ties break lexicographically.
    pub top_bug: Option<Combination>,
    pub per_combination_counts: BTreeMap<String, usize>,
    /// Priority ranks 1..=5 mapped to bins 0..=4.
    pub priority_histogram: [usize; 5],
    /// Severity ranks 1..=7 mapped to bins 0..=6.
    pub severity_histogram: [usize; 7],
    pub first_active: DateTime<Utc>,
    pub last_active: DateTime<Utc>,
    /// "YYYY-MM" -> count.
    pub monthly_activity: BTreeMap<String, usize>,
}

impl DeveloperProfile {
    fn new(name: &str, first: DateTime<Utc>) -> Self {
        DeveloperProfile {
            name: name.to_string(),
            bug_list: Vec::new(),
            amount_of_bugs: 0,
            top_bug: None,
            per_combination_counts: BTreeMap::new(),
            priority_histogram: [0; 5],
            severity_histogram: [0; 7],
            first_active: first,
            last_active: first,
            monthly_activity: BTreeMap::new(),
        }
    }

    /// Folds one report into the profile.
    pub fn add_report(&mut self, report: &BugReport) {
        let combo = report.combination();
        self.bug_list.push(BugEntry {
            report_id: report.id.clone(),
            created_time: report.created_time,
            combination: combo.clone(),
            priority: report.priority,
            severity: report.severity,
            weight: 1.0,
        });
        self.amount_of_bugs += 1;
        *self.per_combination_counts.entry(combo.key()).or_insert(0) += 1;
        self.priority_histogram[(report.priority.clamp(1, 5) - 1) as usize] += 1;
        self.severity_histogram[(report.severity.clamp(1, 7) - 1) as usize] += 1;
        self.first_active = self.first_active.min(report.created_time);
        self.last_active = self.last_active.max(report.created_time);
        let month = format!(
            "{:04}-{:02}",
            report.created_time.year(),
            report.created_time.month()
        );
        *self.monthly_activity.entry(month).or_insert(0) += 1;
        self.recompute_top_bug();
    }

    fn recompute_top_bug(&mut self) {
        self.top_bug = self
            .per_combination_counts
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
            .map(|(key, _)| {
                let (product, component) = key.split_once('|').unwrap_or((key, ""));
                Combination::new(product, component)
            });
    }

    /// True when at least one fixed bug falls in the window of
    /// `window_days` calendar days ending at `date`.
    pub fn is_active(&self, date: DateTime<Utc>, window_days: i64) -> bool {
        let query = date.date_naive();
        let floor = query - Duration::days(window_days);
        self.bug_list
            .iter()
            .any(|b| (floor..=query).contains(&b.created_time.date_naive()))
    }

    /// Most recent fix on or before `date`, if any.
    pub fn last_active_before(&self, date: DateTime<Utc>) -> Option<DateTime<Utc>> {
        self.bug_list
            .iter()
            .map(|b| b.created_time)
            .filter(|&t| t <= date)
            .max()
    }

    /// Bugs at least as urgent as the query in either dimension:
    /// priority rank <= query's, or severity rank <= query's.
    pub fn experience(&self, priority: u8, severity: u8) -> usize {
        self.bug_list
            .iter()
            .filter(|b| b.priority <= priority || b.severity <= severity)
            .count()
    }

    /// Bugs with priority rank at most `priority`.
    pub fn priority_experience(&self, priority: u8) -> usize {
        let cut = priority.clamp(1, 5) as usize;
        self.priority_histogram[..cut].iter().sum()
    }

    /// Bugs with severity rank at most `severity`.
    pub fn severity_experience(&self, severity: u8) -> usize {
        let cut = severity.clamp(1, 7) as usize;
        self.severity_histogram[..cut].iter().sum()
    }
}

/// Builds one profile per distinct assignee by counting.
pub fn build_profiles(train_reports: &[BugReport]) -> BTreeMap<String, DeveloperProfile> {
    let mut profiles: BTreeMap<String, DeveloperProfile> = BTreeMap::new();
    for r in train_reports {
        profiles
            .entry(r.assignee.clone())
            .or_insert_with(|| DeveloperProfile::new(&r.assignee, r.created_time))
            .add_report(r);
    }
    profiles
}

/// Developers ordered by bugs fixed, descending; ties break
/// lexicographically by name.
pub fn rank_developers(profiles: &BTreeMap<String, DeveloperProfile>) -> Vec<String> {
    let mut names: Vec<&DeveloperProfile> = profiles.values().collect();
    names.sort_by(|a, b| {
        b.amount_of_bugs
            .cmp(&a.amount_of_bugs)
            .then_with(|| a.name.cmp(&b.name))
    });
    names.iter().map(|p| p.name.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(s: &str) -> DateTime<Utc> {
        DateTime::parse_from_rfc3339(s).unwrap().with_timezone(&Utc)
    }

    fn report(id: &str, dev: &str, combo: (&str, &str), prio: u8, sev: u8, created: &str) -> BugReport {
        BugReport {
            id: id.to_string(),
            product: combo.0.to_string(),
            component: combo.1.to_string(),
            title: format!("bug {id}"),
            description: String::new(),
            comments: vec![],
            priority: prio,
            severity: sev,
            status: "RESOLVED".to_string(),
            resolution: "FIXED".to_string(),
            assignee: dev.to_string(),
            created_time: ts(created),
            resolved_time: None,
        }
    }

    #[test]
    fn counts_and_top_bug() {
        let reports = vec![
            report("1", "alice", ("A", "x"), 1, 1, "2012-01-01T00:00:00Z"),
            report("2", "alice", ("A", "x"), 3, 4, "2012-02-01T00:00:00Z"),
            report("3", "alice", ("B", "y"), 3, 4, "2012-03-01T00:00:00Z"),
        ];
        let profiles = build_profiles(&reports);
        let p = &profiles["alice"];
        assert_eq!(p.amount_of_bugs, 3);
        assert_eq!(p.top_bug, Some(Combination::new("A", "x")));
        assert_eq!(p.first_active, ts("2012-01-01T00:00:00Z"));
        assert_eq!(p.last_active, ts("2012-03-01T00:00:00Z"));
        assert_eq!(p.monthly_activity["2012-01"], 1);
    }

    #[test]
    fn empty_input_empty_map() {
        assert!(build_profiles(&[]).is_empty());
    }

    #[test]
    fn histograms_sum_to_amount() {
        let reports: Vec<BugReport> = (0..25)
            .map(|i| {
                report(
                    &format!("r{i}"),
                    "dev",
                    ("P", "c"),
                    (i % 5 + 1) as u8,
                    (i % 7 + 1) as u8,
                    &format!("2012-01-{:02}T00:00:00Z", i % 28 + 1),
                )
            })
            .collect();
        let profiles = build_profiles(&reports);
        let p = &profiles["dev"];
        assert_eq!(p.priority_histogram.iter().sum::<usize>(), p.amount_of_bugs);
        assert_eq!(p.severity_histogram.iter().sum::<usize>(), p.amount_of_bugs);
        assert_eq!(p.bug_list.len(), p.amount_of_bugs);
    }

    #[test]
    fn ranking_order_and_ties() {
        let mut reports = Vec::new();
        for (dev, n) in [("x", 5), ("y", 3), ("z", 9)] {
            for i in 0..n {
                reports.push(report(
                    &format!("{dev}{i}"),
                    dev,
                    ("P", "c"),
                    3,
                    4,
                    "2012-01-01T00:00:00Z",
                ));
            }
        }
        let profiles = build_profiles(&reports);
        assert_eq!(rank_developers(&profiles), vec!["z", "x", "y"]);

        let equal = build_profiles(&[
            report("1", "beta", ("P", "c"), 3, 4, "2012-01-01T00:00:00Z"),
            report("2", "alpha", ("P", "c"), 3, 4, "2012-01-01T00:00:00Z"),
        ]);
        assert_eq!(rank_developers(&equal), vec!["alpha", "beta"]);
    }

    #[test]
    fn activity_window() {
        let profiles = build_profiles(&[report(
            "1",
            "dev",
            ("P", "c"),
            3,
            4,
            "2013-01-05T00:00:00Z",
        )]);
        let p = &profiles["dev"];
        assert!(p.is_active(ts("2013-01-10T00:00:00Z"), 90));
        assert!(!p.is_active(ts("2012-01-10T00:00:00Z"), 90));

        let old = build_profiles(&[report(
            "2",
            "dev",
            ("P", "c"),
            3,
            4,
            "2012-01-01T00:00:00Z",
        )]);
        assert!(!old["dev"].is_active(ts("2013-01-10T00:00:00Z"), 90));
    }

    #[test]
    fn zero_window_means_same_day() {
        let profiles = build_profiles(&[report(
            "1",
            "dev",
            ("P", "c"),
            3,
            4,
            "2013-01-05T08:00:00Z",
        )]);
        let p = &profiles["dev"];
        assert!(p.is_active(ts("2013-01-05T23:00:00Z"), 0));
        assert!(!p.is_active(ts("2013-01-06T01:00:00Z"), 0));
    }

    #[test]
    fn activity_monotone_in_window() {
        let profiles = build_profiles(&[report(
            "1",
            "dev",
            ("P", "c"),
            3,
            4,
            "2012-11-01T00:00:00Z",
        )]);
        let p = &profiles["dev"];
        let date = ts("2013-01-10T00:00:00Z");
        let mut prev = false;
        for w in [0, 10, 50, 70, 100, 365] {
            let now = p.is_active(date, w);
            assert!(!prev || now, "activity must be monotone in window");
            prev = now;
        }
    }

    #[test]
    fn experience_rules() {
        let profiles = build_profiles(&[report(
            "1",
            "dev",
            ("P", "c"),
            1,
            1,
            "2012-01-01T00:00:00Z",
        )]);
        let p = &profiles["dev"];
        assert_eq!(p.experience(3, 4), 1);
        assert_eq!(p.experience(1, 1), 1);
        assert_eq!(p.priority_experience(3), 1);
        assert_eq!(p.severity_experience(1), 1);

        let none = build_profiles(&[]);
        assert!(none.is_empty());

        let mild = build_profiles(&[report(
            "2",
            "dev",
            ("P", "c"),
            4,
            5,
            "2012-01-01T00:00:00Z",
        )]);
        // a P4/minor bug does not count toward a P1/blocker query
        assert_eq!(mild["dev"].experience(1, 1), 0);
    }

    #[test]
    fn build_is_a_pure_fold() {
        let first: Vec<BugReport> = (0..5)
            .map(|i| {
                report(
                    &format!("a{i}"),
                    "dev",
                    ("P", "c"),
                    (i % 5 + 1) as u8,
                    4,
                    &format!("2012-01-{:02}T00:00:00Z", i + 1),
                )
            })
            .collect();
        let second: Vec<BugReport> = (0..4)
            .map(|i| {
                report(
                    &format!("b{i}"),
                    "dev",
                    ("Q", "d"),
                    3,
                    (i % 7 + 1) as u8,
                    &format!("2012-02-{:02}T00:00:00Z", i + 1),
                )
            })
            .collect();
        let mut combined = first.clone();
        combined.extend(second.clone());
        let whole = build_profiles(&combined);
        let mut partial = build_profiles(&first);
        for r in &second {
            partial.get_mut("dev").unwrap().add_report(r);
        }
        assert_eq!(whole["dev"], partial["dev"]);
    }
}
