//! Deterministic synthetic corpora for tests, benchmarks, and demos.

use chrono::{Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::BugReport;

/// Thematic vocabulary blocks with no shared words, one per developer.
pub const VOCAB_BLOCKS: [[&str; 12]; 6] = [
    [
        "segfault", "backtrace", "pointer", "allocator", "heap", "corruption",
        "deadlock", "mutex", "interrupt", "kernel", "panic", "overflow",
    ],
    [
        "widget", "layout", "toolbar", "button", "pixel", "spacing",
        "render", "scrollbar", "palette", "icon", "cursor", "viewport",
    ],
    [
        "socket", "timeout", "packet", "handshake", "proxy", "latency",
        "gateway", "bandwidth", "protocol", "firewall", "datagram", "routing",
    ],
    [
        "query", "schema", "index", "transaction", "rollback", "cursorset",
        "migration", "replication", "shard", "vacuum", "join", "deadrow",
    ],
    [
        "tutorial", "glossary", "chapter", "typo", "paragraph", "snippet",
        "readme", "manual", "appendix", "footnote", "heading", "caption",
    ],
    [
        "compiler", "linker", "makefile", "dependency", "artifact", "toolchain",
        "sysroot", "manifest", "cache", "pipeline", "target", "flag",
    ],
];

pub const DEVELOPERS: [&str; 6] = ["alice", "bob", "carol", "dave", "erin", "frank"];

fn sample_words(rng: &mut ChaCha8Rng, block: &[&str], n: usize) -> String {
    (0..n)
        .map(|_| block[rng.gen_range(0..block.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

/// A planted triage project: `devs` developers with disjoint vocabulary
/// blocks and distinct product/component, priority/severity, and activity
/// signatures. Reports interleave in time (one per day, round-robin by
/// developer) so a chronological split leaves every developer test reports.
pub fn planted_triage_corpus(devs: usize, per_dev: usize, seed: u64) -> Vec<BugReport> {
    assert!(devs <= DEVELOPERS.len(), "at most {} developers", DEVELOPERS.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = Utc.with_ymd_and_hms(2010, 1, 1, 12, 0, 0).unwrap();
    let mut reports = Vec::with_capacity(devs * per_dev);
    for j in 0..per_dev {
        for (i, dev) in DEVELOPERS.iter().take(devs).enumerate() {
            let g = j * devs + i;
            let block = &VOCAB_BLOCKS[i];
            let title = sample_words(&mut rng, block, 4);
            let description = sample_words(&mut rng, block, 8);
            let comments = if rng.gen_bool(0.5) {
                vec![sample_words(&mut rng, block, 3)]
            } else {
                vec![]
            };
            let created = base + Duration::days(g as i64);
            reports.push(BugReport {
                id: format!("B{g:04}"),
                product: format!("prod-{i}"),
                component: format!("comp-{i}"),
                title,
                description,
                comments,
                priority: ((i % 5) + 1) as u8,
                severity: ((i % 7) + 1) as u8,
                status: "RESOLVED".to_string(),
                resolution: "FIXED".to_string(),
                assignee: dev.to_string(),
                created_time: created,
                resolved_time: Some(created + Duration::days(3)),
            });
        }
    }
    reports
}

/// Two planted topics over disjoint vocabulary halves: documents 0..n/2 draw
/// from words 0..half, the rest from half..vocab. Returns (docs, vocab size,
/// the two generating distributions).
pub fn planted_two_topic_corpus(
    num_docs: usize,
    vocab_size: usize,
    tokens_per_doc: usize,
    seed: u64,
) -> (Vec<Vec<u32>>, usize, [Vec<f64>; 2]) {
    assert!(vocab_size >= 4 && vocab_size.is_multiple_of(2));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = vocab_size / 2;
    let mut docs = Vec::with_capacity(num_docs);
    for d in 0..num_docs {
        let (lo, hi) = if d < num_docs / 2 {
            (0u32, half as u32)
        } else {
            (half as u32, vocab_size as u32)
        };
        docs.push((0..tokens_per_doc).map(|_| rng.gen_range(lo..hi)).collect());
    }
    let mut phi0 = vec![0.0; vocab_size];
    let mut phi1 = vec![0.0; vocab_size];
    phi0[..half].fill(1.0 / half as f64);
    phi1[half..].fill(1.0 / half as f64);
    (docs, vocab_size, [phi0, phi1])
}

/// Two Gaussian blobs on the x axis, `separation` apart.
pub fn two_blob_points(per_blob: usize, separation: f64, sigma: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    let mut points = Vec::with_capacity(2 * per_blob);
    for &cx in &[0.0, separation] {
        for _ in 0..per_blob {
            points.push(vec![cx + noise.sample(&mut rng), noise.sample(&mut rng)]);
        }
    }
    points
}
