//! Ranked-list records shared by `acw rank` and the service.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use acw_core::nn::Band;
use acw_core::{Ranked, WarningType, WeakLabelClass};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassProbs {
    #[serde(rename = "FalseWarning")]
    pub false_warning: f64,
    #[serde(rename = "UTB")]
    pub utb: f64,
    #[serde(rename = "LTB")]
    pub ltb: f64,
    #[serde(rename = "VTB")]
    pub vtb: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub rank: usize,
    pub id: String,
    pub warning_type: WarningType,
    pub file: String,
    pub line: u32,
    pub procedure: String,
    pub qualifier: String,
    pub predicted_class: WeakLabelClass,
    pub probs: ClassProbs,
    pub detector_prob: f64,
    pub score: f64,
    pub band: Band,
}

impl From<&Ranked> for RankedEntry {
    fn from(r: &Ranked) -> Self {
        let [false_warning, utb, ltb, vtb] = r.prediction.class_probs;
        RankedEntry {
            rank: r.rank,
            id: r.warning.id.clone(),
            warning_type: r.warning.warning_type,
            file: r.warning.file.clone(),
            line: r.warning.line,
            procedure: r.warning.procedure.clone(),
            qualifier: r.warning.qualifier.clone(),
            predicted_class: r.prediction.predicted_class,
            probs: ClassProbs {
                false_warning,
                utb,
                ltb,
                vtb,
            },
            detector_prob: r.prediction.detector_prob,
            score: r.prediction.score,
            band: r.band,
        }
    }
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating a file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("replacing {}", path.display()))?;
    Ok(())
}
