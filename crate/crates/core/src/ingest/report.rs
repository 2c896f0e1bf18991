//! Analyzer report parsing.
//!
//! A report is a JSON array of records carrying at least `bug_type`,
//! `qualifier`, `file`, `line` and `procedure`, the field names used by
//! `infer`'s `report.json`. Extra fields are ignored.

use serde_json::Value;

use crate::config::BugTypeMap;
use crate::digest::sha256_hex;
use crate::error::{Error, Result};
use crate::model::Warning;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedRecord {
    pub index: usize,
    pub bug_type: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedReport {
    pub warnings: Vec<Warning>,
    /// Input record index of each entry of `warnings`.
    pub record_indices: Vec<usize>,
    pub skipped: Vec<SkippedRecord>,
}

impl ParsedReport {
    pub fn record_count(&self) -> usize {
        self.warnings.len() + self.skipped.len()
    }
}

/// Parses a report produced for the revision with ordinal `revision_index`.
pub fn parse_report(bytes: &[u8], bug_types: &BugTypeMap, revision_index: usize) -> Result<ParsedReport> {
    let doc: Value = serde_json::from_slice(bytes).map_err(|e| Error::ReportSyntax {
        offset: byte_offset(bytes, e.line(), e.column()),
        message: e.to_string(),
    })?;
    let records = match doc {
        Value::Array(records) => records,
        _ => {
            let offset = bytes.iter().position(|b| !b.is_ascii_whitespace()).unwrap_or(0);
            return Err(Error::ReportSyntax {
                offset,
                message: "top-level value is not an array".into(),
            });
        }
    };

    let mut out = ParsedReport::default();
    for (index, record) in records.iter().enumerate() {
        let field = |name: &str| -> Result<&Value> {
            record.get(name).ok_or_else(|| Error::ReportRecord {
                index,
                message: format!("missing required field `{name}`"),
            })
        };
        let text = |name: &str| -> Result<String> {
            field(name)?
                .as_str()
                .map(str::to_owned)
                .ok_or_else(|| Error::ReportRecord {
                    index,
                    message: format!("field `{name}` must be a string"),
                })
        };

        let bug_type = text("bug_type")?;
        let qualifier = text("qualifier")?;
        let file = text("file")?;
        let procedure = text("procedure")?;
        let line = field("line")?
            .as_u64()
            .filter(|&l| l >= 1 && l <= u64::from(u32::MAX))
            .ok_or_else(|| Error::ReportRecord {
                index,
                message: "field `line` must be a positive integer".into(),
            })? as u32;
        if file.is_empty() || qualifier.is_empty() {
            return Err(Error::ReportRecord {
                index,
                message: "`file` and `qualifier` must be non-empty".into(),
            });
        }

        let Some(warning_type) = bug_types.lookup(&bug_type) else {
            out.skipped.push(SkippedRecord { index, bug_type });
            continue;
        };
        let id = warning_id(revision_index, index, &bug_type, &file, line, &procedure, &qualifier);
        out.warnings.push(Warning {
            id,
            warning_type,
            qualifier,
            file,
            line,
            procedure,
            revision_index,
        });
        out.record_indices.push(index);
    }
    Ok(out)
}

fn warning_id(
    revision_index: usize,
    record_index: usize,
    bug_type: &str,
    file: &str,
    line: u32,
    procedure: &str,
    qualifier: &str,
) -> String {
    let key = format!("{revision_index}\0{record_index}\0{bug_type}\0{file}\0{line}\0{procedure}\0{qualifier}");
    format!("w{}", &sha256_hex(key.as_bytes())[..16])
}

/// serde_json reports 1-based line and column (column in bytes).
fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    if line <= 1 {
        return column.saturating_sub(1).min(bytes.len());
    }
    let mut seen = 1;
    for (i, b) in bytes.iter().enumerate() {
        if *b == b'\n' {
            seen += 1;
            if seen == line {
                return (i + column).min(bytes.len());
            }
        }
    }
    bytes.len()
}
