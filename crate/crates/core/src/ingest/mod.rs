//! Parsing of analyzer reports, diffs and revision histories.

pub mod diff;
pub mod history;
pub mod report;

pub use diff::{parse_unified_diff, DiffSet, FileDiff, Hunk, HunkLine};
pub use history::{load_history, CommitMeta, HistorySource, RevisionAnalysis, SourceMode, SourceSnapshot};
pub use report::{parse_report, ParsedReport, SkippedRecord};
