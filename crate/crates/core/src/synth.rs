//! Synthetic labeled corpora and analyzer reports with planted signal.
//!
//! Every generated warning sits in a small C function:
//!
//! ```c
//! int <a>_handler(int n) {
//!     int <b>_len = 0;
//!     if (<c>_ok(n)) {
//!         <d>_check(<b>_len);      // the flagged line
//!     }
//!     return <b>_len;
//! }
//! ```
//!
//! `a`..`d` are marker words. Each marker is drawn from the pool of the
//! warning's class with probability [`SynthConfig::signal`], otherwise from the
//! union of all pools. The pools are disjoint, so the class is recoverable
//! from the markers with some noise; everything else (identifier stems, file
//! names, line numbers, warning type) is drawn independently of the class.
//!
//! The identifier `<b>_<stem>` also appears in the qualifier, so markers
//! reach both encoder channels.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::LabeledRecord;
use crate::encoder::code_channel;
use crate::ingest::SourceSnapshot;
use crate::miner::WarningStatus;
use crate::model::{aggregate_label, Warning, WarningType, WeakLabelClass, SEMANTIC_SCORES, STRUCTURAL_SCORES};

/// Marker words per class, in class order (FalseWarning, UTB, LTB, VTB).
pub const MARKER_POOLS: [[&str; 6]; 4] = [
    ["macro", "generated", "defensive", "assert", "guarded", "inline"],
    ["log", "trace", "debug", "stats", "format", "config"],
    ["alloc", "open", "socket", "buffer", "parse", "read"],
    ["free", "close", "realloc", "index", "copy", "length"],
];

const STEMS: [&str; 12] = ["len", "buf", "ptr", "ctx", "node", "rc", "tmp", "fd", "item", "cur", "hdr", "val"];
const FILES: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthConfig {
    /// VTB, LTB and UTB counts.
    pub vtb: usize,
    pub ltb: usize,
    pub utb: usize,
    pub false_warnings: usize,
    /// Probability that a marker comes from the warning's own class pool.
    pub signal: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            vtb: 30,
            ltb: 40,
            utb: 130,
            false_warnings: 2000,
            signal: 0.9,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn total(&self) -> usize {
        self.vtb + self.ltb + self.utb + self.false_warnings
    }
}

fn qualifier(t: WarningType, id: &str, line: u32) -> String {
    match t {
        WarningType::UninitializedVariable => format!("The value read from `{id}` was never initialized."),
        WarningType::NullDereference => format!(
            "pointer `{id}` last assigned on line {} could be null and is dereferenced at line {line}.",
            line.saturating_sub(2).max(1)
        ),
        WarningType::ResourceLeak => format!(
            "resource acquired to `{id}` by call to `fopen()` at line {} is not released after line {line}.",
            line.saturating_sub(2).max(1)
        ),
        WarningType::DeadStore => format!("The value written to &{id} (type int) is never used."),
    }
}

fn bug_type(t: WarningType) -> &'static str {
    match t {
        WarningType::UninitializedVariable => "UNINITIALIZED_VALUE",
        WarningType::NullDereference => "NULL_DEREFERENCE",
        WarningType::ResourceLeak => "RESOURCE_LEAK",
        WarningType::DeadStore => "DEAD_STORE",
    }
}

/// One generated function and the warning pointing into it.
struct Planted {
    warning_type: WarningType,
    procedure: String,
    id: String,
    body: Vec<String>,
}

/// Offset of the flagged line within [`Planted::body`].
const FLAGGED: u32 = 3;

fn marker(rng: &mut ChaCha8Rng, class: WeakLabelClass, signal: f64) -> &'static str {
    let pool = if rng.random_bool(signal) {
        &MARKER_POOLS[class.index()]
    } else {
        MARKER_POOLS.choose(rng).expect("non-empty")
    };
    pool.choose(rng).expect("non-empty")
}

fn plant(rng: &mut ChaCha8Rng, class: WeakLabelClass, signal: f64, n: usize) -> Planted {
    let [a, b, c, d] = std::array::from_fn(|_| marker(rng, class, signal));
    let stem = STEMS.choose(rng).expect("non-empty");
    let id = format!("{b}_{stem}");
    let procedure = format!("{a}_handler_{n}");
    let body = vec![
        format!("int {procedure}(int n) {{"),
        format!("    int {id} = 0;"),
        format!("    if ({c}_ok(n)) {{"),
        format!("        {d}_check({id});"),
        "    }".to_string(),
        format!("    return {id};"),
        "}".to_string(),
    ];
    Planted {
        warning_type: *WarningType::ALL.choose(rng).expect("non-empty"),
        procedure,
        id,
        body,
    }
}

fn label_scores(rng: &mut ChaCha8Rng, class: WeakLabelClass) -> (Option<u8>, Option<u8>) {
    if class == WeakLabelClass::FalseWarning {
        return (None, None);
    }
    let pairs: Vec<(u8, u8)> = SEMANTIC_SCORES
        .iter()
        .flat_map(|&cm| STRUCTURAL_SCORES.iter().map(move |&cc| (cm, cc)))
        .filter(|&(cm, cc)| aggregate_label(cm, cc).ok() == Some(class))
        .collect();
    let (cm, cc) = *pairs.choose(rng).expect("every actionable class has a preimage");
    (Some(cm), Some(cc))
}

/// Labeled records in seeded random order.
pub fn labeled_corpus(cfg: &SynthConfig) -> Vec<LabeledRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut classes: Vec<WeakLabelClass> = [
        (WeakLabelClass::Vtb, cfg.vtb),
        (WeakLabelClass::Ltb, cfg.ltb),
        (WeakLabelClass::Utb, cfg.utb),
        (WeakLabelClass::FalseWarning, cfg.false_warnings),
    ]
    .iter()
    .flat_map(|&(c, n)| std::iter::repeat_n(c, n))
    .collect();
    classes.shuffle(&mut rng);

    classes
        .into_iter()
        .enumerate()
        .map(|(n, class)| {
            let p = plant(&mut rng, class, cfg.signal, n);
            let file = format!("src/mod{}.c", rng.random_range(0..FILES));
            let line = FLAGGED + 1;
            let warning = Warning {
                id: format!("s{n:05}"),
                warning_type: p.warning_type,
                qualifier: qualifier(p.warning_type, &p.id, line),
                file: file.clone(),
                line,
                procedure: p.procedure,
                revision_index: 0,
            };
            let snapshot = SourceSnapshot {
                files: BTreeMap::from([(file, p.body.join("\n"))]),
            };
            let code_tokens = code_channel(&warning, &snapshot);
            let (cm, cc) = label_scores(&mut rng, class);
            LabeledRecord {
                warning,
                status: if class == WeakLabelClass::FalseWarning {
                    WarningStatus::FalseAlarm
                } else {
                    WarningStatus::Actionable
                },
                cm,
                cc,
                aggregated: class,
                project: "synthetic".into(),
                code_tokens,
            }
        })
        .collect()
}

/// An analyzer report plus the sources it points into.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticReport {
    pub report_json: String,
    pub sources: BTreeMap<String, String>,
    /// Planted class of each report record.
    pub classes: Vec<WeakLabelClass>,
}

#[derive(Serialize)]
struct ReportRecord<'a> {
    bug_type: &'a str,
    qualifier: String,
    file: &'a str,
    line: u32,
    procedure: &'a str,
}

/// `n` warnings with classes drawn in the proportions of `cfg`, spread over
/// source files that contain the generated functions.
pub fn report(cfg: &SynthConfig, n: usize) -> SyntheticReport {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let weights = [cfg.false_warnings, cfg.utb, cfg.ltb, cfg.vtb];
    let total: usize = weights.iter().sum::<usize>().max(1);
    let mut files: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut planted = Vec::with_capacity(n);
    let mut classes = Vec::with_capacity(n);
    for i in 0..n {
        let mut r = rng.random_range(0..total);
        let mut ci = 0;
        while r >= weights[ci] {
            r -= weights[ci];
            ci += 1;
        }
        let class = WeakLabelClass::ORDER[ci];
        let p = plant(&mut rng, class, cfg.signal, i);
        let file = format!("src/mod{}.c", rng.random_range(0..FILES));
        let lines = files.entry(file.clone()).or_default();
        let line = lines.len() as u32 + FLAGGED + 1;
        lines.extend(p.body.iter().cloned());
        lines.push(String::new());
        planted.push((p, file, line));
        classes.push(class);
    }
    let records: Vec<ReportRecord> = planted
        .iter()
        .map(|(p, file, line)| ReportRecord {
            bug_type: bug_type(p.warning_type),
            qualifier: qualifier(p.warning_type, &p.id, *line),
            file,
            line: *line,
            procedure: &p.procedure,
        })
        .collect();
    SyntheticReport {
        report_json: serde_json::to_string_pretty(&records).expect("records serialize"),
        sources: files.into_iter().map(|(k, v)| (k, v.join("\n") + "\n")).collect(),
        classes,
    }
}
