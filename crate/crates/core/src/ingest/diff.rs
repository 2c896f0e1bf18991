//! Unified diff parsing and rendering.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffSet {
    pub files: Vec<FileDiff>,
}

/// Changes to one file. A `None` path stands for `/dev/null`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDiff {
    pub old_path: Option<String>,
    pub new_path: Option<String>,
    pub hunks: Vec<Hunk>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hunk {
    pub old_start: u32,
    pub old_len: u32,
    pub new_start: u32,
    pub new_len: u32,
    /// Text after the closing `@@`, verbatim.
    pub section: String,
    pub lines: Vec<HunkLine>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HunkLine {
    Context { text: String, old_line: u32, new_line: u32 },
    Added { text: String, new_line: u32 },
    Removed { text: String, old_line: u32 },
}

impl FileDiff {
    /// The path the change applies to: the new path, or the old one for deletions.
    pub fn path(&self) -> &str {
        self.new_path
            .as_deref()
            .or(self.old_path.as_deref())
            .unwrap_or_default()
    }

    pub fn is_deletion(&self) -> bool {
        self.new_path.is_none() && self.old_path.is_some()
    }

    pub fn is_creation(&self) -> bool {
        self.old_path.is_none() && self.new_path.is_some()
    }

    /// Whether this entry touches `path` under either name.
    pub fn touches(&self, path: &str) -> bool {
        self.old_path.as_deref() == Some(path) || self.new_path.as_deref() == Some(path)
    }
}

impl Hunk {
    pub fn added(&self) -> impl Iterator<Item = (u32, &str)> {
        self.lines.iter().filter_map(|l| match l {
            HunkLine::Added { text, new_line } => Some((*new_line, text.as_str())),
            _ => None,
        })
    }

    pub fn removed(&self) -> impl Iterator<Item = (u32, &str)> {
        self.lines.iter().filter_map(|l| match l {
            HunkLine::Removed { text, old_line } => Some((*old_line, text.as_str())),
            _ => None,
        })
    }
}

impl DiffSet {
    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    /// All entries touching `path`.
    pub fn for_file<'a>(&'a self, path: &'a str) -> impl Iterator<Item = &'a FileDiff> + 'a {
        self.files.iter().filter(move |f| f.touches(path))
    }

    /// True if the diff deletes `path`.
    pub fn deletes(&self, path: &str) -> bool {
        self.files
            .iter()
            .any(|f| f.is_deletion() && f.old_path.as_deref() == Some(path))
    }

    /// Renders the diff in git's unified format.
    pub fn to_unified(&self) -> String {
        let mut out = String::new();
        for f in &self.files {
            let a = f.old_path.as_deref().unwrap_or_else(|| f.path());
            let b = f.new_path.as_deref().unwrap_or_else(|| f.path());
            let _ = writeln!(out, "diff --git a/{a} b/{b}");
            if f.old_path.is_none() {
                out.push_str("new file mode 100644\n");
            } else if f.new_path.is_none() {
                out.push_str("deleted file mode 100644\n");
            }
            match &f.old_path {
                Some(p) => {
                    let _ = writeln!(out, "--- a/{p}");
                }
                None => out.push_str("--- /dev/null\n"),
            }
            match &f.new_path {
                Some(p) => {
                    let _ = writeln!(out, "+++ b/{p}");
                }
                None => out.push_str("+++ /dev/null\n"),
            }
            for h in &f.hunks {
                let _ = writeln!(
                    out,
                    "@@ -{},{} +{},{} @@{}",
                    h.old_start, h.old_len, h.new_start, h.new_len, h.section
                );
                for l in &h.lines {
                    let (sigil, text) = match l {
                        HunkLine::Context { text, .. } => (' ', text),
                        HunkLine::Added { text, .. } => ('+', text),
                        HunkLine::Removed { text, .. } => ('-', text),
                    };
                    out.push(sigil);
                    out.push_str(text);
                    out.push('\n');
                }
            }
        }
        out
    }
}

const EXTENDED_HEADERS: [&str; 12] = [
    "old mode ",
    "new mode ",
    "index ",
    "similarity index ",
    "dissimilarity index ",
    "rename from ",
    "rename to ",
    "copy from ",
    "copy to ",
    "Binary files ",
    "GIT binary patch",
    "literal ",
];

/// Parses unified diff text. Content before the first file header (for
/// example `git show` commit preambles) is ignored.
pub fn parse_unified_diff(bytes: &[u8]) -> Result<DiffSet> {
    let text = String::from_utf8_lossy(bytes);
    let mut lines: Vec<&str> = text.split('\n').collect();
    if lines.last() == Some(&"") {
        lines.pop();
    }

    let mut set = DiffSet::default();
    // Set while the current file entry came from a `diff --git` line and has
    // not yet seen its `---`/`+++` pair.
    let mut awaiting_paths = false;
    let mut i = 0;
    while i < lines.len() {
        let line = lines[i];
        let lineno = i + 1;

        if let Some(rest) = line.strip_prefix("diff --git ") {
            let (a, b) = split_git_header(rest);
            set.files.push(FileDiff {
                old_path: Some(a),
                new_path: Some(b),
                hunks: Vec::new(),
            });
            awaiting_paths = true;
            i += 1;
            continue;
        }

        if line.starts_with("--- ") && lines.get(i + 1).is_some_and(|n| n.starts_with("+++ ")) {
            let old_path = header_path(&line[4..], "a/");
            let new_path = header_path(&lines[i + 1][4..], "b/");
            match set.files.last_mut() {
                Some(f) if awaiting_paths => {
                    f.old_path = old_path;
                    f.new_path = new_path;
                }
                _ => set.files.push(FileDiff {
                    old_path,
                    new_path,
                    hunks: Vec::new(),
                }),
            }
            awaiting_paths = false;
            i += 2;
            continue;
        }

        if line.starts_with("@@") {
            let Some(file) = set.files.last_mut() else {
                return Err(Error::DiffSyntax {
                    line: lineno,
                    message: "hunk before any file header".into(),
                });
            };
            awaiting_paths = false;
            let (hunk, consumed) = parse_hunk(&lines, i)?;
            file.hunks.push(hunk);
            i += consumed;
            continue;
        }

        if awaiting_paths {
            if line.starts_with("deleted file mode ") {
                if let Some(f) = set.files.last_mut() {
                    f.new_path = None;
                }
            } else if line.starts_with("new file mode ") {
                if let Some(f) = set.files.last_mut() {
                    f.old_path = None;
                }
            } else if !EXTENDED_HEADERS.iter().any(|h| line.starts_with(h)) {
                awaiting_paths = false;
            }
            i += 1;
            continue;
        }

        let in_hunked_file = set.files.last().is_some_and(|f| !f.hunks.is_empty());
        if in_hunked_file && matches!(line.as_bytes().first(), Some(b'+' | b'-' | b' ')) {
            return Err(Error::DiffSyntax {
                line: lineno,
                message: "hunk line count mismatch: line outside any hunk".into(),
            });
        }
        i += 1;
    }
    Ok(set)
}

fn parse_hunk(lines: &[&str], start: usize) -> Result<(Hunk, usize)> {
    let header = lines[start];
    let bad = |message: String| Error::DiffSyntax {
        line: start + 1,
        message,
    };
    let body = header
        .strip_prefix("@@ -")
        .ok_or_else(|| bad(format!("malformed hunk header `{header}`")))?;
    let close = body
        .find(" @@")
        .ok_or_else(|| bad(format!("malformed hunk header `{header}`")))?;
    let (ranges, section) = (&body[..close], &body[close + 3..]);
    let (old, new) = ranges
        .split_once(" +")
        .ok_or_else(|| bad(format!("malformed hunk ranges `{ranges}`")))?;
    let (old_start, old_len) = parse_range(old).ok_or_else(|| bad(format!("bad range `{old}`")))?;
    let (new_start, new_len) = parse_range(new).ok_or_else(|| bad(format!("bad range `{new}`")))?;

    let mut hunk = Hunk {
        old_start,
        old_len,
        new_start,
        new_len,
        section: section.to_string(),
        lines: Vec::new(),
    };
    let (mut old_left, mut new_left) = (old_len, new_len);
    let (mut old_no, mut new_no) = (old_start, new_start);
    let mut i = start + 1;
    while old_left > 0 || new_left > 0 {
        let Some(&line) = lines.get(i) else {
            return Err(Error::DiffSyntax {
                line: i + 1,
                message: format!(
                    "hunk line count mismatch: input ended with {old_left} old and {new_left} new lines outstanding"
                ),
            });
        };
        let mismatch = |what: &str| Error::DiffSyntax {
            line: i + 1,
            message: format!("hunk line count mismatch: unexpected {what}"),
        };
        match line.as_bytes().first() {
            Some(b'\\') => {}
            Some(b'+') => {
                if new_left == 0 {
                    return Err(mismatch("added line"));
                }
                hunk.lines.push(HunkLine::Added {
                    text: line[1..].to_string(),
                    new_line: new_no,
                });
                new_no += 1;
                new_left -= 1;
            }
            Some(b'-') => {
                if old_left == 0 {
                    return Err(mismatch("removed line"));
                }
                hunk.lines.push(HunkLine::Removed {
                    text: line[1..].to_string(),
                    old_line: old_no,
                });
                old_no += 1;
                old_left -= 1;
            }
            Some(b' ') | None => {
                if old_left == 0 || new_left == 0 {
                    return Err(mismatch("context line"));
                }
                hunk.lines.push(HunkLine::Context {
                    text: line.get(1..).unwrap_or_default().to_string(),
                    old_line: old_no,
                    new_line: new_no,
                });
                old_no += 1;
                new_no += 1;
                old_left -= 1;
                new_left -= 1;
            }
            Some(_) => return Err(mismatch("line inside hunk")),
        }
        i += 1;
    }
    // A trailing "no newline" marker belongs to this hunk.
    while lines.get(i).is_some_and(|l| l.starts_with('\\')) {
        i += 1;
    }
    Ok((hunk, i - start))
}

fn parse_range(s: &str) -> Option<(u32, u32)> {
    match s.split_once(',') {
        Some((a, b)) => Some((a.parse().ok()?, b.parse().ok()?)),
        None => Some((s.parse().ok()?, 1)),
    }
}

fn header_path(raw: &str, prefix: &str) -> Option<String> {
    let raw = raw.split('\t').next().unwrap_or(raw).trim_end_matches('\r');
    if raw == "/dev/null" {
        return None;
    }
    Some(raw.strip_prefix(prefix).unwrap_or(raw).to_string())
}

fn split_git_header(rest: &str) -> (String, String) {
    // `a/<p> b/<p>`: when both names agree the split point is exact even if
    // the path contains " b/".
    if let Some(body) = rest.strip_prefix("a/") {
        if body.len() >= 3 && (body.len() - 3) % 2 == 0 {
            let n = (body.len() - 3) / 2;
            if body.is_char_boundary(n) && body[n..].starts_with(" b/") && body[..n] == body[n + 3..] {
                return (body[..n].to_string(), body[..n].to_string());
            }
        }
        if let Some((a, b)) = body.split_once(" b/") {
            return (a.to_string(), b.to_string());
        }
    }
    (rest.to_string(), rest.to_string())
}
