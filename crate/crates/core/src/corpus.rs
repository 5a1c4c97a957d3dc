//! Bug-report corpus ingestion: CSV parsing, normalization, filtering,
//! statistics, and chronological train/test splits.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical CSV schema, in column order. These are the default header names;
/// a custom column map can rename them.
pub const CANONICAL_COLUMNS: [&str; 13] = [
    "Issue_id",
    "Product",
    "Component",
    "Title",
    "Description",
    "Priority",
    "Severity",
    "Status",
    "Resolution",
    "Assignee",
    "Created_time",
    "Resolved_time",
    "Comments",
];

/// Canonical field a CSV column maps onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Id,
    Product,
    Component,
    Title,
    Description,
    Priority,
    Severity,
    Status,
    Resolution,
    Assignee,
    CreatedTime,
    ResolvedTime,
    Comments,
}

impl Field {
    fn canonical_header(self) -> &'static str {
        match self {
            Field::Id => "Issue_id",
            Field::Product => "Product",
            Field::Component => "Component",
            Field::Title => "Title",
            Field::Description => "Description",
            Field::Priority => "Priority",
            Field::Severity => "Severity",
            Field::Status => "Status",
            Field::Resolution => "Resolution",
            Field::Assignee => "Assignee",
            Field::CreatedTime => "Created_time",
            Field::ResolvedTime => "Resolved_time",
            Field::Comments => "Comments",
        }
    }
}

/// Maps CSV header names to canonical fields. Defaults to the canonical
/// schema; unmapped canonical fields take empty/sentinel values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap(pub BTreeMap<String, Field>);

impl Default for ColumnMap {
    fn default() -> Self {
        let all = [
            Field::Id,
            Field::Product,
            Field::Component,
            Field::Title,
            Field::Description,
            Field::Priority,
            Field::Severity,
            Field::Status,
            Field::Resolution,
            Field::Assignee,
            Field::CreatedTime,
            Field::ResolvedTime,
            Field::Comments,
        ];
        ColumnMap(
            all.iter()
                .map(|&f| (f.canonical_header().to_string(), f))
                .collect(),
        )
    }
}

/// Normalizes a priority label to rank 1..=5 (1 = most urgent).
/// Accepts P1..P5 (any case), bare digits, and common names; anything else
/// falls back to the middle rank 3.
pub fn priority_rank(label: &str) -> u8 {
    let l = label.trim().to_lowercase();
    match l.as_str() {
        "p1" | "1" | "highest" | "blocker" | "urgent" => 1,
        "p2" | "2" | "high" | "major" => 2,
        "p3" | "3" | "normal" | "medium" | "" => 3,
        "p4" | "4" | "low" | "minor" => 4,
        "p5" | "5" | "lowest" | "trivial" => 5,
        _ => 3,
    }
}

/// Normalizes a severity label to rank 1..=7 (1 = most severe):
/// blocker > critical > major > normal > minor > trivial > enhancement.
pub fn severity_rank(label: &str) -> u8 {
    match label.trim().to_lowercase().as_str() {
        "blocker" | "s1" | "1" => 1,
        "critical" | "s2" | "2" => 2,
        "major" | "s3" | "3" => 3,
        "normal" | "s4" | "4" | "" => 4,
        "minor" | "s5" | "5" => 5,
        "trivial" | "s6" | "6" => 6,
        "enhancement" | "s7" | "7" => 7,
        _ => 4,
    }
}

pub fn priority_label(rank: u8) -> String {
    format!("P{rank}")
}

pub fn severity_label(rank: u8) -> &'static str {
    match rank {
        1 => "blocker",
        2 => "critical",
        3 => "major",
        5 => "minor",
        6 => "trivial",
        7 => "enhancement",
        _ => "normal",
    }
}

/// One issue-tracker record, normalized.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugReport {
    pub id: String,
    pub product: String,
    pub component: String,
    pub title: String,
    pub description: String,
    pub comments: Vec<String>,
    /// 1..=5, 1 = most urgent.
    pub priority: u8,
    /// 1..=7, 1 = most severe.
    pub severity: u8,
    pub status: String,
    pub resolution: String,
    /// Developer id; may be empty for unassigned reports.
    pub assignee: String,
    pub created_time: DateTime<Utc>,
    pub resolved_time: Option<DateTime<Utc>>,
}

impl BugReport {
    pub fn combination(&self) -> Combination {
        Combination::new(&self.product, &self.component)
    }

    /// Text stream used for modeling: title + description + comments.
    pub fn text(&self) -> String {
        let mut s = String::with_capacity(
            self.title.len() + self.description.len() + 32 * self.comments.len(),
        );
        s.push_str(&self.title);
        s.push(' ');
        s.push_str(&self.description);
        for c in &self.comments {
            s.push(' ');
            s.push_str(c);
        }
        s
    }
}

/// A (product, component) pair; equality is case-insensitive on both fields.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Combination {
    pub product: String,
    pub component: String,
}

impl Combination {
    pub fn new(product: &str, component: &str) -> Self {
        Combination {
            product: product.trim().to_lowercase(),
            component: component.trim().to_lowercase(),
        }
    }

    pub fn key(&self) -> String {
        format!("{}|{}", self.product, self.component)
    }
}

/// Dataset statistics before and after filtering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    /// (min created_time, max created_time) over the input; None when empty.
    pub period: Option<(DateTime<Utc>, DateTime<Utc>)>,
    pub amount: usize,
    pub products: usize,
    pub components: usize,
    pub combinations: usize,
    pub developers: usize,
    pub final_amount: usize,
    pub final_developers: usize,
}

/// Filtering rules applied before modeling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    /// Keep developers with at least this many qualifying reports.
    pub min_fixed: usize,
    /// Generic-assignee patterns. The empty pattern matches only an empty
    /// assignee; other patterns match case-insensitively as substrings.
    pub name_blacklist: Vec<String>,
    pub required_resolution: String,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            min_fixed: 100,
            name_blacklist: vec![
                "nobody".to_string(),
                "unassigned".to_string(),
                "inbox".to_string(),
                String::new(),
                "triaged".to_string(),
            ],
            required_resolution: "FIXED".to_string(),
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_fixed < 1 {
            return Err(Error::argument("min_fixed must be >= 1"));
        }
        Ok(())
    }

    fn blacklisted(&self, assignee: &str) -> bool {
        let a = assignee.trim().to_lowercase();
        self.name_blacklist.iter().any(|p| {
            let p = p.trim().to_lowercase();
            if p.is_empty() {
                a.is_empty()
            } else {
                a.contains(&p)
            }
        })
    }
}

/// A row that failed normalization, with the 1-based data row number.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub row_number: usize,
    pub reason: String,
}

/// Output of CSV ingestion: normalized reports plus a rejects report.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseOutcome {
    pub reports: Vec<BugReport>,
    pub rejects: Vec<Reject>,
}

fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.with_timezone(&Utc));
    }
    if let Ok(naive) = NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S") {
        return Some(naive.and_utc());
    }
    None
}

/// Parses a bug-report CSV (UTF-8, RFC-4180 quoting). Well-formed rows are
/// normalized; malformed rows land in the rejects report with a reason.
pub fn parse_csv(path: &Path, column_map: &ColumnMap) -> Result<ParseOutcome> {
    let file = std::fs::File::open(path)?;
    parse_csv_reader(file, column_map)
}

/// Same as [`parse_csv`] over any reader.
pub fn parse_csv_reader<R: std::io::Read>(
    reader: R,
    column_map: &ColumnMap,
) -> Result<ParseOutcome> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();

    // Resolve each canonical field to a column index, if mapped and present.
    let mut field_col: BTreeMap<Field, usize> = BTreeMap::new();
    for (i, h) in headers.iter().enumerate() {
        if let Some(&field) = column_map.0.get(h.trim()) {
            field_col.insert(field, i);
        }
    }
    for required in [Field::Id, Field::Title, Field::CreatedTime] {
        if !field_col.contains_key(&required) {
            return Err(Error::MissingColumn(
                required.canonical_header().to_string(),
            ));
        }
    }

    let get = |record: &csv::StringRecord, f: Field| -> String {
        field_col
            .get(&f)
            .and_then(|&i| record.get(i))
            .unwrap_or("")
            .trim()
            .to_string()
    };

    let mut reports: Vec<BugReport> = Vec::new();
    let mut rejects: Vec<Reject> = Vec::new();
    let mut seen_ids: HashSet<String> = HashSet::new();

    for (row_idx, record) in rdr.records().enumerate() {
        let row_number = row_idx + 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                rejects.push(Reject {
                    row_number,
                    reason: format!("malformed row: {e}"),
                });
                continue;
            }
        };

        let id = get(&record, Field::Id);
        if id.is_empty() {
            rejects.push(Reject {
                row_number,
                reason: "missing id".to_string(),
            });
            continue;
        }
        if seen_ids.contains(&id) {
            rejects.push(Reject {
                row_number,
                reason: format!("duplicate id {id}"),
            });
            continue;
        }

        let created_raw = get(&record, Field::CreatedTime);
        let Some(created_time) = parse_timestamp(&created_raw) else {
            rejects.push(Reject {
                row_number,
                reason: format!("bad timestamp `{created_raw}`"),
            });
            continue;
        };

        let resolved_raw = get(&record, Field::ResolvedTime);
        let resolved_time = if resolved_raw.is_empty() {
            None
        } else {
            match parse_timestamp(&resolved_raw) {
                Some(t) => Some(t),
                None => {
                    rejects.push(Reject {
                        row_number,
                        reason: format!("bad timestamp `{resolved_raw}`"),
                    });
                    continue;
                }
            }
        };
        if let Some(r) = resolved_time {
            if r < created_time {
                rejects.push(Reject {
                    row_number,
                    reason: "resolved before created".to_string(),
                });
                continue;
            }
        }

        let comments: Vec<String> = get(&record, Field::Comments)
            .split('\n')
            .map(|c| c.trim().to_string())
            .filter(|c| !c.is_empty())
            .collect();

        seen_ids.insert(id.clone());
        reports.push(BugReport {
            id,
            product: get(&record, Field::Product),
            component: get(&record, Field::Component),
            title: get(&record, Field::Title),
            description: get(&record, Field::Description),
            comments,
            priority: priority_rank(&get(&record, Field::Priority)),
            severity: severity_rank(&get(&record, Field::Severity)),
            status: get(&record, Field::Status),
            resolution: get(&record, Field::Resolution),
            assignee: get(&record, Field::Assignee),
            created_time,
            resolved_time,
        });
    }

    Ok(ParseOutcome { reports, rejects })
}

fn fmt_time(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Writes reports in the canonical CSV schema. Parsing the output again
/// reproduces the same reports.
pub fn write_csv<W: Write>(reports: &[BugReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CANONICAL_COLUMNS)?;
    for r in reports {
        w.write_record([
            r.id.as_str(),
            r.product.as_str(),
            r.component.as_str(),
            r.title.as_str(),
            r.description.as_str(),
            &priority_label(r.priority),
            severity_label(r.severity),
            r.status.as_str(),
            r.resolution.as_str(),
            r.assignee.as_str(),
            &fmt_time(&r.created_time),
            &r.resolved_time.as_ref().map(fmt_time).unwrap_or_default(),
            &r.comments.join("\n"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the rejects report as CSV with columns (row_number, reason).
pub fn write_rejects<W: Write>(rejects: &[Reject], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["row_number", "reason"])?;
    for r in rejects {
        w.write_record([r.row_number.to_string().as_str(), r.reason.as_str()])?;
    }
    w.flush()?;
    Ok(())
}

/// Applies the filtering rules: required resolution, assignee blacklist, and
/// the per-developer minimum report count. Returns the kept reports and
/// statistics covering both the input and the filtered output.
pub fn filter_corpus(reports: &[BugReport], cfg: &FilterConfig) -> Result<(Vec<BugReport>, CorpusStats)> {
    cfg.validate()?;

    let mut products: BTreeSet<String> = BTreeSet::new();
    let mut components: BTreeSet<String> = BTreeSet::new();
    let mut combinations: BTreeSet<Combination> = BTreeSet::new();
    let mut developers: BTreeSet<&str> = BTreeSet::new();
    let mut period: Option<(DateTime<Utc>, DateTime<Utc>)> = None;

    for r in reports {
        products.insert(r.product.trim().to_lowercase());
        components.insert(r.component.trim().to_lowercase());
        combinations.insert(r.combination());
        if !r.assignee.trim().is_empty() {
            developers.insert(r.assignee.as_str());
        }
        period = Some(match period {
            None => (r.created_time, r.created_time),
            Some((lo, hi)) => (lo.min(r.created_time), hi.max(r.created_time)),
        });
    }

    let want = cfg.required_resolution.to_lowercase();
    let passing: Vec<&BugReport> = reports
        .iter()
        .filter(|r| r.resolution.to_lowercase() == want && !cfg.blacklisted(&r.assignee))
        .collect();

    let mut per_dev: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &passing {
        *per_dev.entry(r.assignee.as_str()).or_insert(0) += 1;
    }
    let qualified: BTreeSet<&str> = per_dev
        .iter()
        .filter(|&(_, &n)| n >= cfg.min_fixed)
        .map(|(&d, _)| d)
        .collect();

    let kept: Vec<BugReport> = passing
        .into_iter()
        .filter(|r| qualified.contains(r.assignee.as_str()))
        .cloned()
        .collect();

    // empty product/component strings count as values so that
    // combinations <= products * components holds structurally
    let stats = CorpusStats {
        period,
        amount: reports.len(),
        products: products.len(),
        components: components.len(),
        combinations: combinations.len(),
        developers: developers.len(),
        final_amount: kept.len(),
        final_developers: qualified.len(),
    };
    Ok((kept, stats))
}

/// Sorts ascending by (created_time, id) and splits at ceil(ratio * n).
/// Ties on created_time stay in id order, so the boundary cut inside a tie
/// group keeps the lowest ids on the train side.
pub fn chronological_split(
    reports: &[BugReport],
    ratio: f64,
) -> Result<(Vec<BugReport>, Vec<BugReport>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::argument(format!("split ratio {ratio} must be in (0,1)")));
    }
    if reports.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut sorted: Vec<BugReport> = reports.to_vec();
    sorted.sort_by(|a, b| {
        a.created_time
            .cmp(&b.created_time)
            .then_with(|| a.id.cmp(&b.id))
    });
    let n = sorted.len();
    let boundary = ((ratio * n as f64).ceil() as usize).min(n);
    let test = sorted.split_off(boundary);
    Ok((sorted, test))
}

/// Train/test halves of one split.
pub type SplitPair = (Vec<BugReport>, Vec<BugReport>);

/// Groups reports by assignee and applies [`chronological_split`] per group.
pub fn per_developer_split(
    reports: &[BugReport],
    ratio: f64,
) -> Result<BTreeMap<String, SplitPair>> {
    let mut groups: BTreeMap<String, Vec<BugReport>> = BTreeMap::new();
    for r in reports {
        groups.entry(r.assignee.clone()).or_default().push(r.clone());
    }
    let mut out = BTreeMap::new();
    for (dev, group) in groups {
        out.insert(dev, chronological_split(&group, ratio)?);
    }
    Ok(out)
}
