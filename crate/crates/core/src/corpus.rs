//! Labeled corpus records: the training and evaluation input.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::digest::sha256_hex;
use crate::encoder::{text_channel, TokenChannels};
use crate::miner::WarningStatus;
use crate::model::{Warning, WeakLabelClass};

/// One labeled warning. `cm`/`cc` are present for actionable warnings only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledRecord {
    pub warning: Warning,
    pub status: WarningStatus,
    pub cm: Option<u8>,
    pub cc: Option<u8>,
    pub aggregated: WeakLabelClass,
    /// Repository the warning was mined from; used for project-level splits.
    #[serde(default)]
    pub project: String,
    /// Code-channel tokens captured from the source snapshot at labeling time.
    #[serde(default)]
    pub code_tokens: Vec<String>,
}

impl LabeledRecord {
    pub fn channels(&self) -> TokenChannels {
        TokenChannels {
            text_tokens: text_channel(&self.warning),
            code_tokens: self.code_tokens.clone(),
        }
    }

    pub fn is_actionable(&self) -> bool {
        self.aggregated != WeakLabelClass::FalseWarning
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelTally {
    pub vtb: usize,
    pub ltb: usize,
    pub utb: usize,
    pub false_warning: usize,
}

impl LabelTally {
    pub fn of<'a>(records: impl IntoIterator<Item = &'a LabeledRecord>) -> Self {
        let mut t = LabelTally::default();
        for r in records {
            match r.aggregated {
                WeakLabelClass::Vtb => t.vtb += 1,
                WeakLabelClass::Ltb => t.ltb += 1,
                WeakLabelClass::Utb => t.utb += 1,
                WeakLabelClass::FalseWarning => t.false_warning += 1,
            }
        }
        t
    }

    pub fn actionable(&self) -> usize {
        self.vtb + self.ltb + self.utb
    }
}

/// Stable digest of a record list (its canonical JSONL bytes).
pub fn corpus_digest(records: &[LabeledRecord]) -> String {
    let mut bytes = Vec::new();
    for r in records {
        bytes.extend(serde_json::to_vec(r).expect("records serialize"));
        bytes.push(b'\n');
    }
    sha256_hex(&bytes)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified split by label class: within each class a seeded shuffle puts
/// `round(n * test_fraction)` items in the test set. Indices are sorted.
pub fn stratified_split(records: &[LabeledRecord], test_fraction: f64, seed: u64) -> Split {
    let mut by_class: BTreeMap<WeakLabelClass, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        by_class.entry(r.aggregated).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (_, mut idx) in by_class {
        idx.shuffle(&mut rng);
        let n_test = (idx.len() as f64 * test_fraction).round() as usize;
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Split { train, test }
}

/// Project-level split: whole projects go to the test side, picked in seeded
/// order until the test side holds at least `test_fraction` of the records.
pub fn project_split(records: &[LabeledRecord], test_fraction: f64, seed: u64) -> Split {
    let mut projects: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        projects.entry(r.project.as_str()).or_default().push(i);
    }
    let mut names: Vec<&str> = projects.keys().copied().collect();
    names.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let target = (records.len() as f64 * test_fraction).round() as usize;
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for name in names {
        let idx = &projects[name];
        if test.len() < target && test.len() + idx.len() < records.len() {
            test.extend_from_slice(idx);
        } else {
            train.extend_from_slice(idx);
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    Split { train, test }
}
