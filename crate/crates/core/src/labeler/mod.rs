//! Weak labeling of actionable warnings from their fix commits.

pub mod context;
pub mod keywords;
pub mod rules;

use rayon::prelude::*;

pub use context::{extract_context_identifiers, ContextIdentifiers};
pub use keywords::KeywordConfig;
pub use rules::{semantic_score, structural_score};

use crate::corpus::{LabelTally, LabeledRecord};
use crate::encoder::code_channel;
use crate::error::Result;
use crate::ingest::RevisionAnalysis;
use crate::miner::{fix_commit, MinedCorpus, TrackedWarning, WarningStatus};
use crate::model::{WeakLabel, WeakLabelClass};

/// Scores one actionable warning against its fix commit.
pub fn label_warning(tracked: &TrackedWarning, revisions: &[RevisionAnalysis], cfg: &KeywordConfig) -> Result<WeakLabel> {
    let (commit, diff) = fix_commit(tracked, revisions)?;
    let w = &tracked.representative;
    let ids = extract_context_identifiers(w);
    let cm = semantic_score(&commit.message, w, &ids, cfg);
    let cc = structural_score(diff, w, &ids, cfg);
    WeakLabel::new(cm, cc)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledCorpus {
    pub records: Vec<LabeledRecord>,
    pub tally: LabelTally,
}

/// Labels every actionable warning, passes false alarms through as
/// `FalseWarning` and drops undecided ones.
pub fn label_corpus(mined: &MinedCorpus, revisions: &[RevisionAnalysis], cfg: &KeywordConfig) -> Result<LabeledCorpus> {
    let records: Vec<Option<LabeledRecord>> = mined
        .warnings
        .par_iter()
        .map(|t| -> Result<Option<LabeledRecord>> {
            let (cm, cc, aggregated) = match t.status {
                WarningStatus::Undecided => return Ok(None),
                WarningStatus::FalseAlarm => (None, None, WeakLabelClass::FalseWarning),
                WarningStatus::Actionable => {
                    let l = label_warning(t, revisions, cfg)?;
                    (Some(l.cm), Some(l.cc), l.aggregated)
                }
            };
            let code_tokens = revisions
                .get(t.representative.revision_index)
                .and_then(|r| r.snapshot.as_ref())
                .map(|s| code_channel(&t.representative, s))
                .unwrap_or_default();
            Ok(Some(LabeledRecord {
                warning: t.representative.clone(),
                status: t.status,
                cm,
                cc,
                aggregated,
                project: mined.provenance.source.clone(),
                code_tokens,
            }))
        })
        .collect::<Result<_>>()?;
    let records: Vec<LabeledRecord> = records.into_iter().flatten().collect();
    let tally = LabelTally::of(&records);
    Ok(LabeledCorpus { records, tally })
}
