//! Semantic (commit message) and structural (code change) matching rules.

use crate::clex::c_tokens;
use crate::ingest::{DiffSet, HunkLine};
use crate::labeler::context::ContextIdentifiers;
use crate::labeler::keywords::KeywordConfig;
use crate::model::{Warning, WarningType};

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Maximal alphanumeric/underscore runs.
fn words(text: &str) -> Vec<&str> {
    text.split(|c: char| !is_word_char(c)).filter(|w| !w.is_empty()).collect()
}

fn contains_phrase(haystack: &[&str], keyword: &str) -> bool {
    let needle = words(keyword);
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle.as_slice())
}

/// Commit-message matching score in {0, 1, 2, 3}; the highest matching tier wins.
pub fn semantic_score(message: &str, warning: &Warning, ids: &ContextIdentifiers, cfg: &KeywordConfig) -> u8 {
    let lower = message.to_lowercase();
    let lower_words = words(&lower);
    if cfg
        .type_keywords(warning.warning_type)
        .iter()
        .any(|k| contains_phrase(&lower_words, k))
    {
        return 3;
    }
    let raw_words = words(message);
    if ids.iter().any(|id| raw_words.contains(&id)) {
        return 2;
    }
    if cfg.common.iter().any(|k| contains_phrase(&lower_words, k)) {
        return 1;
    }
    0
}

/// A changed line of the warning's file.
#[derive(Debug, Clone, Copy)]
enum Change<'a> {
    Added { line: u32, text: &'a str },
    Removed { line: u32, text: &'a str },
}

fn changes<'a>(diff: &'a DiffSet, file: &'a str) -> impl Iterator<Item = Change<'a>> + 'a {
    diff.for_file(file).flat_map(|f| {
        f.hunks.iter().flat_map(|h| {
            h.lines.iter().filter_map(|l| match l {
                HunkLine::Added { text, new_line } => Some(Change::Added {
                    line: *new_line,
                    text,
                }),
                HunkLine::Removed { text, old_line } => Some(Change::Removed {
                    line: *old_line,
                    text,
                }),
                HunkLine::Context { .. } => None,
            })
        })
    })
}

fn assigns_or_references(tokens: &[String], var: &str) -> bool {
    tokens.iter().enumerate().any(|(i, t)| {
        if t != var {
            return false;
        }
        let assigned = tokens.get(i + 1).is_some_and(|n| n == "=");
        let by_reference = i >= 2 && tokens[i - 1] == "&" && matches!(tokens[i - 2].as_str(), "(" | ",");
        assigned || by_reference
    })
}

fn is_null(t: &str) -> bool {
    matches!(t, "NULL" | "null")
}

fn null_check(tokens: &[String], ptr: &str) -> bool {
    if !tokens.iter().any(|t| t == "if") {
        return false;
    }
    let cmp = |t: &str| t == "==" || t == "!=";
    tokens.windows(3).any(|w| {
        (w[0] == ptr && cmp(&w[1]) && is_null(&w[2])) || (is_null(&w[0]) && cmp(&w[1]) && w[2] == ptr)
    }) || tokens.windows(2).any(|w| w[0] == "!" && w[1] == ptr)
}

fn releases(tokens: &[String], var: &str, free_fns: &[String]) -> bool {
    tokens.iter().enumerate().any(|(i, t)| {
        if !free_fns.iter().any(|f| f == t) || tokens.get(i + 1).map(String::as_str) != Some("(") {
            return false;
        }
        let mut depth = 0usize;
        for tok in &tokens[i + 1..] {
            match tok.as_str() {
                "(" => depth += 1,
                ")" => {
                    depth -= 1;
                    if depth == 0 {
                        break;
                    }
                }
                _ if tok == var => return true,
                _ => {}
            }
        }
        false
    })
}

fn uses(tokens: &[String], var: &str) -> bool {
    tokens
        .iter()
        .enumerate()
        .any(|(i, t)| t == var && tokens.get(i + 1).map(String::as_str) != Some("="))
}

/// Code-change matching score in {0, 1, 3}: 3 when the per-type fix pattern
/// matches, 1 when only the before/after-warning scope does.
pub fn structural_score(diff: &DiffSet, warning: &Warning, ids: &ContextIdentifiers, cfg: &KeywordConfig) -> u8 {
    let at = warning.line;
    let var = ids.variable.as_deref();
    let ptr = ids.pointer.as_deref();
    let before = matches!(
        warning.warning_type,
        WarningType::UninitializedVariable | WarningType::NullDereference
    );

    let mut in_scope = false;
    for change in changes(diff, &warning.file) {
        let (line, text, added) = match change {
            Change::Added { line, text } => (line, text, true),
            Change::Removed { line, text } => (line, text, false),
        };
        let scoped = if before { line <= at } else { line >= at };
        in_scope |= scoped;

        let fixed = match warning.warning_type {
            WarningType::UninitializedVariable => {
                added && scoped && var.is_some_and(|v| assigns_or_references(&c_tokens(text), v))
            }
            WarningType::NullDereference => added && scoped && ptr.is_some_and(|p| null_check(&c_tokens(text), p)),
            WarningType::ResourceLeak => {
                added
                    && scoped
                    && var.is_some_and(|v| releases(&c_tokens(text), v, cfg.free_functions(WarningType::ResourceLeak)))
            }
            WarningType::DeadStore => {
                (added && scoped && var.is_some_and(|v| uses(&c_tokens(text), v))) || (!added && line == at)
            }
        };
        if fixed {
            return 3;
        }
    }
    if in_scope {
        1
    } else {
        0
    }
}
