//! Triage session state: one judgment per warning plus the full history.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::output::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Confirmed,
    Dismissed,
}

impl Verdict {
    pub fn parse(s: &str) -> Option<Verdict> {
        match s {
            "confirmed" => Some(Verdict::Confirmed),
            "dismissed" => Some(Verdict::Dismissed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub verdict: Verdict,
    /// Unix seconds.
    pub timestamp: i64,
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentEvent {
    pub warning_id: String,
    #[serde(flatten)]
    pub judgment: Judgment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub report_digest: String,
    /// Latest judgment per warning.
    pub judgments: BTreeMap<String, Judgment>,
    pub history: Vec<JudgmentEvent>,
}

impl Session {
    pub fn new(session_id: String, report_digest: String) -> Self {
        Session {
            session_id,
            report_digest,
            judgments: BTreeMap::new(),
            history: Vec::new(),
        }
    }

    /// Loads `path` if it exists, checking it belongs to the same report and
    /// only judges known warnings; otherwise starts a fresh session.
    pub fn open(path: &Path, session_id: &str, report_digest: &str, known: impl Fn(&str) -> bool) -> Result<Self> {
        if !path.exists() {
            return Ok(Session::new(session_id.into(), report_digest.into()));
        }
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let s: Session = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if s.report_digest != report_digest {
            bail!(
                "{} belongs to a different report (digest {}, serving {report_digest})",
                path.display(),
                s.report_digest
            );
        }
        if let Some(id) = s.judgments.keys().find(|id| !known(id)) {
            bail!("{} judges unknown warning {id}", path.display());
        }
        Ok(s)
    }

    pub fn apply(&mut self, warning_id: &str, judgment: Judgment) {
        self.history.push(JudgmentEvent {
            warning_id: warning_id.into(),
            judgment: judgment.clone(),
        });
        self.judgments.insert(warning_id.into(), judgment);
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        write_atomic(path, text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn j(verdict: Verdict, t: i64) -> Judgment {
        Judgment {
            verdict,
            timestamp: t,
            note: String::new(),
        }
    }

    #[test]
    fn latest_wins_history_kept() {
        let mut s = Session::new("s".into(), "d".into());
        s.apply("w1", j(Verdict::Confirmed, 1));
        s.apply("w1", j(Verdict::Dismissed, 2));
        assert_eq!(s.judgments["w1"].verdict, Verdict::Dismissed);
        assert_eq!(s.history.len(), 2);
    }

    #[test]
    fn reopen_checks_digest_and_ids() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.json");
        let mut s = Session::new("s".into(), "d".into());
        s.apply("w1", j(Verdict::Confirmed, 1));
        s.save(&path).unwrap();
        assert_eq!(Session::open(&path, "s", "d", |_| true).unwrap(), s);
        assert!(Session::open(&path, "s", "other", |_| true).is_err());
        assert!(Session::open(&path, "s", "d", |id| id != "w1").is_err());
        let fresh = Session::open(&dir.path().join("none.json"), "s", "d", |_| true).unwrap();
        assert!(fresh.judgments.is_empty());
    }

    #[test]
    fn verdict_names() {
        assert_eq!(Verdict::parse("confirmed"), Some(Verdict::Confirmed));
        assert_eq!(Verdict::parse("Confirmed"), None);
        assert_eq!(serde_json::to_string(&Verdict::Dismissed).unwrap(), "\"dismissed\"");
    }
}
