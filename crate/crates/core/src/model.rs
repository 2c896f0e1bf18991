//! Shared domain vocabulary: warnings, fingerprints and weak labels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four analyzer bug categories the pipeline understands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningType {
    UninitializedVariable,
    NullDereference,
    ResourceLeak,
    DeadStore,
}

impl WarningType {
    pub const ALL: [WarningType; 4] = [
        WarningType::UninitializedVariable,
        WarningType::NullDereference,
        WarningType::ResourceLeak,
        WarningType::DeadStore,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            WarningType::UninitializedVariable => "uninitialized_variable",
            WarningType::NullDereference => "null_dereference",
            WarningType::ResourceLeak => "resource_leak",
            WarningType::DeadStore => "dead_store",
        }
    }

    /// Human readable name, as shown in triage views.
    pub fn display_name(self) -> &'static str {
        match self {
            WarningType::UninitializedVariable => "Uninitialized Variable",
            WarningType::NullDereference => "Null Dereference",
            WarningType::ResourceLeak => "Resource Leak",
            WarningType::DeadStore => "Dead Store",
        }
    }
}

impl fmt::Display for WarningType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WarningType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        WarningType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown warning type `{s}`")))
    }
}

/// One analyzer finding.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Warning {
    pub id: String,
    pub warning_type: WarningType,
    pub qualifier: String,
    pub file: String,
    pub line: u32,
    pub procedure: String,
    pub revision_index: usize,
}

impl Warning {
    pub fn validate(&self) -> Result<()> {
        if self.line == 0 {
            return Err(Error::Contract(format!("warning {}: line must be >= 1", self.id)));
        }
        if self.file.is_empty() {
            return Err(Error::Contract(format!("warning {}: empty file", self.id)));
        }
        if self.qualifier.is_empty() {
            return Err(Error::Contract(format!("warning {}: empty qualifier", self.id)));
        }
        Ok(())
    }

    pub fn fingerprint(&self) -> WarningFingerprint {
        WarningFingerprint {
            warning_type: self.warning_type,
            file: self.file.clone(),
            procedure: self.procedure.clone(),
            normalized_qualifier: normalize_qualifier(&self.qualifier),
        }
    }
}

/// Line-insensitive identity of a warning across revisions.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WarningFingerprint {
    pub warning_type: WarningType,
    pub file: String,
    pub procedure: String,
    pub normalized_qualifier: String,
}

/// Lowercases, replaces every maximal ASCII digit run with `#` and collapses
/// whitespace runs to a single space.
pub fn normalize_qualifier(qualifier: &str) -> String {
    let mut out = String::with_capacity(qualifier.len());
    let mut in_digits = false;
    let mut pending_space = false;
    for ch in qualifier.chars() {
        if ch.is_whitespace() {
            in_digits = false;
            pending_space = !out.is_empty();
            continue;
        }
        if pending_space {
            out.push(' ');
            pending_space = false;
        }
        if ch.is_ascii_digit() {
            if !in_digits {
                out.push('#');
                in_digits = true;
            }
            continue;
        }
        in_digits = false;
        out.extend(ch.to_lowercase());
    }
    out
}

/// Aggregated weak label, plus the corpus-only `FalseWarning` status.
///
/// The declaration order is the model's class order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum WeakLabelClass {
    #[serde(rename = "FalseWarning")]
    FalseWarning,
    #[serde(rename = "UTB")]
    Utb,
    #[serde(rename = "LTB")]
    Ltb,
    #[serde(rename = "VTB")]
    Vtb,
}

impl WeakLabelClass {
    pub const ORDER: [WeakLabelClass; 4] = [
        WeakLabelClass::FalseWarning,
        WeakLabelClass::Utb,
        WeakLabelClass::Ltb,
        WeakLabelClass::Vtb,
    ];

    /// Base class score: 0/1/2/3 for FalseWarning/UTB/LTB/VTB.
    pub fn base_score(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ORDER.get(i).copied()
    }

    /// Actionable warning with high probability of being a real bug.
    pub fn is_awhb(self) -> bool {
        matches!(self, WeakLabelClass::Vtb | WeakLabelClass::Ltb)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            WeakLabelClass::FalseWarning => "FalseWarning",
            WeakLabelClass::Utb => "UTB",
            WeakLabelClass::Ltb => "LTB",
            WeakLabelClass::Vtb => "VTB",
        }
    }
}

impl fmt::Display for WeakLabelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WeakLabelClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        WeakLabelClass::ORDER
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown label class `{s}`")))
    }
}

pub const SEMANTIC_SCORES: [u8; 4] = [0, 1, 2, 3];
pub const STRUCTURAL_SCORES: [u8; 3] = [0, 1, 3];

/// Combines the semantic (commit message) and structural (code change)
/// matching scores into VTB / LTB / UTB.
pub fn aggregate_label(cm: u8, cc: u8) -> Result<WeakLabelClass> {
    if !SEMANTIC_SCORES.contains(&cm) {
        return Err(Error::Contract(format!("semantic score {cm} outside {{0,1,2,3}}")));
    }
    if !STRUCTURAL_SCORES.contains(&cc) {
        return Err(Error::Contract(format!("structural score {cc} outside {{0,1,3}}")));
    }
    Ok(match cm + cc {
        s if s > 3 => WeakLabelClass::Vtb,
        2 | 3 => WeakLabelClass::Ltb,
        _ => WeakLabelClass::Utb,
    })
}

/// Semantic score, structural score and their aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeakLabel {
    pub cm: u8,
    pub cc: u8,
    pub aggregated: WeakLabelClass,
}

impl WeakLabel {
    pub fn new(cm: u8, cc: u8) -> Result<Self> {
        Ok(WeakLabel {
            cm,
            cc,
            aggregated: aggregate_label(cm, cc)?,
        })
    }
}
