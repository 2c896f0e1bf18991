//! Revision history loading, from an offline fixture directory or a live git
//! working copy.
//!
//! Fixture layout:
//!
//! ```text
//! commits.jsonl          one CommitMeta per line, oldest first
//! reports/<sha>.json     analyzer report for the revision
//! diffs/<sha>.patch      unified diff against the first parent
//! sources/<sha>/...      optional file contents at the revision
//! ```

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::AcwConfig;
use crate::error::{Error, Result};
use crate::ingest::diff::{parse_unified_diff, DiffSet};
use crate::ingest::report::parse_report;
use crate::model::Warning;

/// git's well-known empty tree, used as the parent of root commits.
const EMPTY_TREE: &str = "4b825dc642cb6eb9a060e54bf8d69288fbee4904";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitMeta {
    pub sha: String,
    pub timestamp: i64,
    pub message: String,
    #[serde(default)]
    pub ordinal: usize,
}

/// Full text of files at one revision, keyed by repository-relative path.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSnapshot {
    pub files: BTreeMap<String, String>,
}

impl SourceSnapshot {
    pub fn get(&self, path: &str) -> Option<&str> {
        self.files.get(path).map(String::as_str)
    }

    /// Line `n` (1-based) of `path`.
    pub fn line(&self, path: &str, n: u32) -> Option<&str> {
        let n = usize::try_from(n).ok()?.checked_sub(1)?;
        self.get(path)?.lines().nth(n)
    }

    /// Reads every file under `dir`, keyed by its path relative to `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let mut files = BTreeMap::new();
        let mut stack = vec![dir.to_path_buf()];
        while let Some(d) = stack.pop() {
            for entry in std::fs::read_dir(&d).map_err(|e| Error::io(&d, e))? {
                let entry = entry.map_err(|e| Error::io(&d, e))?;
                let path = entry.path();
                if path.is_dir() {
                    stack.push(path);
                } else {
                    let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
                    let rel = path
                        .strip_prefix(dir)
                        .expect("walked path is under its root")
                        .components()
                        .map(|c| c.as_os_str().to_string_lossy())
                        .collect::<Vec<_>>()
                        .join("/");
                    files.insert(rel, String::from_utf8_lossy(&bytes).into_owned());
                }
            }
        }
        Ok(SourceSnapshot { files })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisionAnalysis {
    pub commit: CommitMeta,
    pub warnings: Vec<Warning>,
    pub diff_against_parent: DiffSet,
    pub snapshot: Option<SourceSnapshot>,
    /// Report records whose bug type is not one of the four handled types.
    pub skipped_records: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceMode {
    Git,
    Fixture,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistorySource {
    pub mode: SourceMode,
    pub path: PathBuf,
}

impl HistorySource {
    pub fn fixture(path: impl Into<PathBuf>) -> Self {
        HistorySource {
            mode: SourceMode::Fixture,
            path: path.into(),
        }
    }

    pub fn git(path: impl Into<PathBuf>) -> Self {
        HistorySource {
            mode: SourceMode::Git,
            path: path.into(),
        }
    }

    /// Picks fixture mode when `commits.jsonl` exists, git otherwise.
    pub fn detect(path: impl Into<PathBuf>) -> Self {
        let path = path.into();
        if path.join("commits.jsonl").is_file() {
            Self::fixture(path)
        } else {
            Self::git(path)
        }
    }
}

/// Loads the analyzed history, oldest first, with dense ordinals.
///
/// With `limit`, only the most recent `limit` first-parent commits are kept.
pub fn load_history(source: &HistorySource, limit: Option<usize>, cfg: &AcwConfig) -> Result<Vec<RevisionAnalysis>> {
    match source.mode {
        SourceMode::Fixture => load_fixture(&source.path, limit, cfg),
        SourceMode::Git => load_git(&source.path, limit, cfg),
    }
}

fn keep_recent<T>(mut items: Vec<T>, limit: Option<usize>) -> Vec<T> {
    if let Some(n) = limit {
        if items.len() > n {
            items.drain(..items.len() - n);
        }
    }
    items
}

pub fn read_commits_jsonl(path: &Path) -> Result<Vec<CommitMeta>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut commits = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let c: CommitMeta = serde_json::from_str(line)
            .map_err(|e| Error::Integrity(format!("{}:{}: {e}", path.display(), i + 1)))?;
        if c.sha.is_empty() || !c.sha.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
            return Err(Error::Integrity(format!(
                "{}:{}: sha `{}` is not lowercase hex",
                path.display(),
                i + 1,
                c.sha
            )));
        }
        if !seen.insert(c.sha.clone()) {
            return Err(Error::Integrity(format!("duplicate sha {}", c.sha)));
        }
        commits.push(c);
    }
    Ok(commits)
}

fn load_fixture(dir: &Path, limit: Option<usize>, cfg: &AcwConfig) -> Result<Vec<RevisionAnalysis>> {
    let commits = keep_recent(read_commits_jsonl(&dir.join("commits.jsonl"))?, limit);
    commits
        .into_par_iter()
        .enumerate()
        .map(|(ordinal, mut commit)| {
            commit.ordinal = ordinal;
            let report_path = dir.join("reports").join(format!("{}.json", commit.sha));
            let report = std::fs::read(&report_path)
                .map_err(|_| Error::Integrity(format!("missing report for {}", commit.sha)))?;
            let parsed = parse_report(&report, &cfg.bug_types, ordinal)
                .map_err(|e| Error::Integrity(format!("report for {}: {e}", commit.sha)))?;
            let diff_path = dir.join("diffs").join(format!("{}.patch", commit.sha));
            let diff = std::fs::read(&diff_path)
                .map_err(|_| Error::Integrity(format!("missing diff for {}", commit.sha)))?;
            let diff = parse_unified_diff(&diff)
                .map_err(|e| Error::Integrity(format!("unparsable diff for {}: {e}", commit.sha)))?;
            let src = dir.join("sources").join(&commit.sha);
            let snapshot = if src.is_dir() {
                Some(SourceSnapshot::from_dir(&src)?)
            } else {
                None
            };
            Ok(RevisionAnalysis {
                commit,
                skipped_records: parsed.skipped.len(),
                warnings: parsed.warnings,
                diff_against_parent: diff,
                snapshot,
            })
        })
        .collect()
}

fn git(repo: &Path, args: &[&str]) -> Result<Vec<u8>> {
    let out = Command::new("git")
        .arg("-C")
        .arg(repo)
        .args(["-c", "core.quotepath=off"])
        .args(args)
        .stdin(Stdio::null())
        .output()
        .map_err(|e| Error::Vcs(format!("cannot run git: {e}")))?;
    if !out.status.success() {
        return Err(Error::Vcs(format!(
            "git {}: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    Ok(out.stdout)
}

/// First-parent history of HEAD, oldest first.
pub fn first_parent_shas(repo: &Path) -> Result<Vec<String>> {
    let out = git(repo, &["rev-list", "--first-parent", "--reverse", "HEAD"])?;
    Ok(String::from_utf8_lossy(&out)
        .lines()
        .map(str::to_owned)
        .filter(|l| !l.is_empty())
        .collect())
}

fn load_git(repo: &Path, limit: Option<usize>, cfg: &AcwConfig) -> Result<Vec<RevisionAnalysis>> {
    if cfg.analyzer_cmd.is_none() && cfg.reports_dir.is_none() {
        return Err(Error::Config(
            "live mode needs `analyzer_cmd` or `reports_dir` in the configuration".into(),
        ));
    }
    let shas = keep_recent(first_parent_shas(repo)?, limit);
    shas.into_par_iter()
        .enumerate()
        .map(|(ordinal, sha)| load_git_revision(repo, &sha, ordinal, cfg))
        .collect()
}

fn load_git_revision(repo: &Path, sha: &str, ordinal: usize, cfg: &AcwConfig) -> Result<RevisionAnalysis> {
    let meta = git(repo, &["show", "-s", "--format=%ct%x00%B", sha])?;
    let meta = String::from_utf8_lossy(&meta);
    let (ts, message) = meta
        .split_once('\0')
        .ok_or_else(|| Error::Vcs(format!("unexpected `git show` output for {sha}")))?;
    let timestamp = ts
        .trim()
        .parse()
        .map_err(|_| Error::Vcs(format!("bad commit timestamp for {sha}")))?;
    let commit = CommitMeta {
        sha: sha.to_string(),
        timestamp,
        message: message.trim_end().to_string(),
        ordinal,
    };

    let parent_spec = format!("{sha}^1");
    let parent = git(repo, &["rev-parse", "--verify", "--quiet", &parent_spec])
        .map(|p| String::from_utf8_lossy(&p).trim().to_string())
        .unwrap_or_else(|_| EMPTY_TREE.to_string());
    let diff = git(
        repo,
        &[
            "diff",
            "--no-color",
            "--no-ext-diff",
            "--no-textconv",
            "--no-renames",
            "--src-prefix=a/",
            "--dst-prefix=b/",
            &parent,
            sha,
        ],
    )?;
    let diff = parse_unified_diff(&diff).map_err(|e| Error::Integrity(format!("unparsable diff for {sha}: {e}")))?;

    let report = read_or_run_analyzer(repo, sha, cfg)?;
    let parsed = parse_report(&report, &cfg.bug_types, ordinal)
        .map_err(|e| Error::Integrity(format!("report for {sha}: {e}")))?;

    let mut snapshot = SourceSnapshot::default();
    let files: BTreeSet<&str> = parsed.warnings.iter().map(|w| w.file.as_str()).collect();
    for file in files {
        if let Ok(text) = git(repo, &["show", &format!("{sha}:{file}")]) {
            snapshot
                .files
                .insert(file.to_string(), String::from_utf8_lossy(&text).into_owned());
        }
    }

    Ok(RevisionAnalysis {
        commit,
        skipped_records: parsed.skipped.len(),
        warnings: parsed.warnings,
        diff_against_parent: diff,
        snapshot: Some(snapshot),
    })
}

fn read_or_run_analyzer(repo: &Path, sha: &str, cfg: &AcwConfig) -> Result<Vec<u8>> {
    if let Some(dir) = &cfg.reports_dir {
        let dir = if dir.is_relative() { repo.join(dir) } else { dir.clone() };
        let path = dir.join(format!("{sha}.json"));
        return std::fs::read(&path).map_err(|_| Error::Integrity(format!("missing report for {sha}")));
    }

    let work = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
    let checkout = work.path().join("checkout");
    std::fs::create_dir(&checkout).map_err(|e| Error::io(&checkout, e))?;
    let tar = git(repo, &["archive", "--format=tar", sha])?;
    let mut untar = Command::new("tar")
        .arg("-x")
        .arg("-C")
        .arg(&checkout)
        .stdin(Stdio::piped())
        .spawn()
        .map_err(|e| Error::Vcs(format!("cannot run tar: {e}")))?;
    untar
        .stdin
        .take()
        .expect("piped stdin")
        .write_all(&tar)
        .map_err(|e| Error::io(&checkout, e))?;
    let status = untar.wait().map_err(|e| Error::io(&checkout, e))?;
    if !status.success() {
        return Err(Error::Vcs(format!("extracting {sha} failed")));
    }

    let out_file = work.path().join("report.json");
    let cmd = cfg
        .analyzer_command(&checkout, &out_file)
        .expect("caller checked analyzer_cmd");
    let out = Command::new("sh")
        .arg("-c")
        .arg(&cmd)
        .current_dir(&checkout)
        .stdin(Stdio::null())
        .output()
        .map_err(|e| Error::Vcs(format!("cannot run analyzer: {e}")))?;
    if !out.status.success() {
        return Err(Error::Integrity(format!(
            "analyzer failed on {sha}: {}",
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    std::fs::read(&out_file).map_err(|_| Error::Integrity(format!("analyzer produced no report for {sha}")))
}
