//! Tracks warning fingerprints across revisions and decides which warnings
//! were acted upon.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{CommitMeta, DiffSet, RevisionAnalysis};
use crate::model::{Warning, WarningFingerprint};

/// Two years of 365.25 days, in seconds.
pub const TWO_YEARS_SECS: i64 = 63_115_200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningStatus {
    Actionable,
    FalseAlarm,
    Undecided,
}

impl WarningStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            WarningStatus::Actionable => "actionable",
            WarningStatus::FalseAlarm => "false_alarm",
            WarningStatus::Undecided => "undecided",
        }
    }
}

/// Why a warning counts as a false alarm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FalseAlarmReason {
    /// The warning vanished because its file was deleted.
    FileDeleted,
    /// Still open more than two years after it first appeared.
    AgedOut,
}

/// One presence episode of a fingerprint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackedWarning {
    pub fingerprint: WarningFingerprint,
    /// The warning as reported in `last_seen`.
    pub representative: Warning,
    pub first_seen: usize,
    pub last_seen: usize,
    pub disappeared_at: Option<usize>,
    pub status: WarningStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<FalseAlarmReason>,
    /// Sha of the revision at `disappeared_at`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fix_commit: Option<String>,
}

/// Builds presence episodes over `revisions` (ordered by ordinal).
///
/// A fingerprint that disappears and later comes back starts a new episode.
/// Returned episodes have status `Undecided`; see [`classify`].
pub fn track(revisions: &[RevisionAnalysis]) -> Result<Vec<TrackedWarning>> {
    if revisions.is_empty() {
        return Err(Error::Integrity("empty history".into()));
    }
    for (i, r) in revisions.iter().enumerate() {
        if r.commit.ordinal != i {
            return Err(Error::Integrity(format!(
                "revision {} has ordinal {}, expected {i}",
                r.commit.sha, r.commit.ordinal
            )));
        }
    }

    // Per revision: distinct fingerprints in first-occurrence order, with the
    // first warning carrying each.
    let present: Vec<Vec<(WarningFingerprint, &Warning)>> = revisions
        .par_iter()
        .map(|r| {
            let mut seen = HashSet::new();
            r.warnings
                .iter()
                .filter_map(|w| {
                    let fp = w.fingerprint();
                    seen.insert(fp.clone()).then_some((fp, w))
                })
                .collect()
        })
        .collect();

    let mut episodes: Vec<TrackedWarning> = Vec::new();
    let mut open: HashMap<WarningFingerprint, usize> = HashMap::new();
    for (ordinal, fps) in present.into_iter().enumerate() {
        let here: HashSet<&WarningFingerprint> = fps.iter().map(|(fp, _)| fp).collect();
        let mut closed: Vec<usize> = open
            .iter()
            .filter(|(fp, _)| !here.contains(fp))
            .map(|(_, &idx)| idx)
            .collect();
        closed.sort_unstable();
        for idx in closed {
            let ep = &mut episodes[idx];
            ep.disappeared_at = Some(ordinal);
            ep.fix_commit = Some(revisions[ordinal].commit.sha.clone());
            open.remove(&ep.fingerprint);
        }
        for (fp, w) in fps {
            match open.get(&fp) {
                Some(&idx) => {
                    let ep = &mut episodes[idx];
                    ep.last_seen = ordinal;
                    ep.representative = w.clone();
                }
                None => {
                    open.insert(fp.clone(), episodes.len());
                    episodes.push(TrackedWarning {
                        fingerprint: fp,
                        representative: w.clone(),
                        first_seen: ordinal,
                        last_seen: ordinal,
                        disappeared_at: None,
                        status: WarningStatus::Undecided,
                        reason: None,
                        fix_commit: None,
                    });
                }
            }
        }
    }
    Ok(episodes)
}

/// Decides the status of one episode at wall-clock time `now` (seconds since
/// the epoch).
pub fn classify(
    tracked: &TrackedWarning,
    revisions: &[RevisionAnalysis],
    now: i64,
) -> (WarningStatus, Option<FalseAlarmReason>) {
    match tracked.disappeared_at {
        Some(d) => {
            let deleted = revisions
                .get(d)
                .is_some_and(|r| r.diff_against_parent.deletes(&tracked.fingerprint.file));
            if deleted {
                (WarningStatus::FalseAlarm, Some(FalseAlarmReason::FileDeleted))
            } else {
                (WarningStatus::Actionable, None)
            }
        }
        None => {
            let born = revisions
                .get(tracked.first_seen)
                .map_or(i64::MAX, |r| r.commit.timestamp);
            if now.saturating_sub(born) > TWO_YEARS_SECS {
                (WarningStatus::FalseAlarm, Some(FalseAlarmReason::AgedOut))
            } else {
                (WarningStatus::Undecided, None)
            }
        }
    }
}

/// The bug-fix candidate of an actionable warning: the revision where it
/// first disappeared.
pub fn fix_commit<'a>(
    tracked: &TrackedWarning,
    revisions: &'a [RevisionAnalysis],
) -> Result<(&'a CommitMeta, &'a DiffSet)> {
    if tracked.status != WarningStatus::Actionable {
        return Err(Error::Contract(format!(
            "fix commit requested for {} warning {}",
            tracked.status.as_str(),
            tracked.representative.id
        )));
    }
    let d = tracked
        .disappeared_at
        .ok_or_else(|| Error::Contract("actionable warning without disappearance".into()))?;
    let by_ordinal = revisions.get(d).filter(|r| match &tracked.fix_commit {
        Some(sha) => &r.commit.sha == sha,
        None => true,
    });
    let rev = match by_ordinal {
        Some(r) => r,
        // History reloaded with a different window: fall back to the sha.
        None => tracked
            .fix_commit
            .as_ref()
            .and_then(|sha| revisions.iter().find(|r| &r.commit.sha == sha))
            .ok_or_else(|| {
                Error::Integrity(format!(
                    "fix commit for warning {} not in loaded history",
                    tracked.representative.id
                ))
            })?,
    };
    Ok((&rev.commit, &rev.diff_against_parent))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusCounts {
    pub actionable: usize,
    pub false_alarm: usize,
    pub undecided: usize,
}

impl StatusCounts {
    pub fn tally<'a>(items: impl IntoIterator<Item = &'a TrackedWarning>) -> Self {
        let mut c = StatusCounts::default();
        for t in items {
            match t.status {
                WarningStatus::Actionable => c.actionable += 1,
                WarningStatus::FalseAlarm => c.false_alarm += 1,
                WarningStatus::Undecided => c.undecided += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.actionable + self.false_alarm + self.undecided
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub mode: String,
    pub limit: Option<usize>,
    pub first_sha: String,
    pub last_sha: String,
    pub revisions: usize,
    /// The `now` used for the aging rule.
    pub mined_at: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinedCorpus {
    pub warnings: Vec<TrackedWarning>,
    pub counts: StatusCounts,
    pub provenance: Provenance,
}

/// Tracks and classifies every episode.
pub fn mine(
    revisions: &[RevisionAnalysis],
    now: i64,
    source: &str,
    mode: &str,
    limit: Option<usize>,
) -> Result<MinedCorpus> {
    let mut warnings = track(revisions)?;
    for t in &mut warnings {
        let (status, reason) = classify(t, revisions, now);
        t.status = status;
        t.reason = reason;
    }
    let counts = StatusCounts::tally(&warnings);
    Ok(MinedCorpus {
        warnings,
        counts,
        provenance: Provenance {
            source: source.to_string(),
            mode: mode.to_string(),
            limit,
            first_sha: revisions[0].commit.sha.clone(),
            last_sha: revisions[revisions.len() - 1].commit.sha.clone(),
            revisions: revisions.len(),
            mined_at: now,
        },
    })
}

pub fn write_jsonl<T: Serialize>(mut out: impl Write, items: &[T]) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n").map_err(|e| Error::io("<output>", e))?;
    }
    Ok(())
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut items = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        items.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::Integrity(format!("{}:{}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(items)
}
