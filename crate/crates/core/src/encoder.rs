//! Warning encoding: two token channels hashed into disjoint halves of a
//! fixed-width vector.
//!
//! The text channel covers the analyzer's bug type, qualifier, procedure and
//! file name. The code channel covers the flagged statement, the header of
//! its enclosing block (found by a backward brace-balance scan) and every
//! control-flow line inside that block.

use serde::{Deserialize, Serialize};

use crate::clex::c_tokens;
use crate::digest::fnv1a64;
use crate::error::{Error, Result};
use crate::ingest::SourceSnapshot;
use crate::model::Warning;
use crate::scalar::Scalar;

pub const DEFAULT_EMBED_DIM: usize = 1024;

const CONTROL_KEYWORDS: [&str; 9] = ["if", "else", "for", "while", "switch", "return", "goto", "break", "continue"];

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenChannels {
    pub text_tokens: Vec<String>,
    pub code_tokens: Vec<String>,
}

impl TokenChannels {
    pub fn is_empty(&self) -> bool {
        self.text_tokens.is_empty() && self.code_tokens.is_empty()
    }
}

/// Splits a letter run at camelCase boundaries (`runAll`, `HTTPServer`).
fn camel_split(run: &[char], out: &mut Vec<String>) {
    let mut start = 0;
    for i in 1..run.len() {
        let (prev, cur) = (run[i - 1], run[i]);
        let next_lower = run.get(i + 1).is_some_and(|c| c.is_lowercase());
        if (prev.is_lowercase() && cur.is_uppercase()) || (prev.is_uppercase() && cur.is_uppercase() && next_lower) {
            out.push(run[start..i].iter().collect::<String>().to_lowercase());
            start = i;
        }
    }
    if start < run.len() {
        out.push(run[start..].iter().collect::<String>().to_lowercase());
    }
}

/// Lowercase word tokens of `text`. Everything that is not a letter separates
/// tokens, so digit runs vanish and snake_case splits on its underscores.
pub fn word_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut run: Vec<char> = Vec::new();
    for c in text.chars() {
        if c.is_alphabetic() {
            run.push(c);
        } else if !run.is_empty() {
            camel_split(&run, &mut out);
            run.clear();
        }
    }
    if !run.is_empty() {
        camel_split(&run, &mut out);
    }
    out
}

/// Word tokens followed by the `prev_cur` bigrams of the same sequence.
fn with_bigrams(words: Vec<String>) -> Vec<String> {
    let bigrams: Vec<String> = words.windows(2).map(|w| format!("{}_{}", w[0], w[1])).collect();
    let mut out = words;
    out.extend(bigrams);
    out
}

pub fn text_channel(warning: &Warning) -> Vec<String> {
    [
        warning.warning_type.display_name(),
        warning.qualifier.as_str(),
        warning.procedure.as_str(),
        warning.file.as_str(),
    ]
    .into_iter()
    .flat_map(|field| with_bigrams(word_tokens(field)))
    .collect()
}

/// 0-based line index of the nearest unmatched `{` at or above `from`,
/// scanning backwards from the start of line `from`.
fn enclosing_open_brace(lines: &[&str], from: usize) -> Option<usize> {
    let mut depth = 0usize;
    for idx in (0..from).rev() {
        for tok in c_tokens(lines[idx]).iter().rev() {
            match tok.as_str() {
                "}" => depth += 1,
                "{" if depth == 0 => return Some(idx),
                "{" => depth -= 1,
                _ => {}
            }
        }
    }
    None
}

/// 0-based line index of the `}` closing the first unmatched `{` on `open`.
fn matching_close_brace(lines: &[&str], open: usize) -> usize {
    let mut depth = 0usize;
    for (idx, line) in lines.iter().enumerate().skip(open) {
        for tok in c_tokens(line) {
            match tok.as_str() {
                "{" => depth += 1,
                "}" => {
                    depth = depth.saturating_sub(1);
                    if depth == 0 {
                        return idx;
                    }
                }
                _ => {}
            }
        }
    }
    lines.len().saturating_sub(1)
}

/// Line indices (0-based) forming the code context of a warning at `line`.
pub fn code_context_lines(source: &str, line: u32) -> Vec<usize> {
    let lines: Vec<&str> = source.lines().collect();
    let Some(bug) = (line as usize).checked_sub(1).filter(|&i| i < lines.len()) else {
        return Vec::new();
    };
    let mut picked = vec![bug];
    if let Some(open) = enclosing_open_brace(&lines, bug) {
        let only_brace = c_tokens(lines[open]).iter().all(|t| t == "{");
        let header = if only_brace {
            (0..open).rev().find(|&i| !lines[i].trim().is_empty()).unwrap_or(open)
        } else {
            open
        };
        if !picked.contains(&header) {
            picked.push(header);
        }
        let close = matching_close_brace(&lines, open);
        for (idx, line) in lines.iter().enumerate().take(close + 1).skip(open) {
            let is_control = c_tokens(line)
                .iter()
                .any(|t| CONTROL_KEYWORDS.contains(&t.as_str()));
            if is_control && !picked.contains(&idx) {
                picked.push(idx);
            }
        }
    }
    picked
}

pub fn code_channel(warning: &Warning, snapshot: &SourceSnapshot) -> Vec<String> {
    let Some(source) = snapshot.get(&warning.file) else {
        return Vec::new();
    };
    let lines: Vec<&str> = source.lines().collect();
    code_context_lines(source, warning.line)
        .into_iter()
        .flat_map(|idx| with_bigrams(word_tokens(lines[idx])))
        .collect()
}

pub fn channels(warning: &Warning, snapshot: Option<&SourceSnapshot>) -> TokenChannels {
    TokenChannels {
        text_tokens: text_channel(warning),
        code_tokens: snapshot.map(|s| code_channel(warning, s)).unwrap_or_default(),
    }
}

/// A fixed-dimension warning representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector<T> {
    pub values: Vec<T>,
}

impl<T: Scalar> EmbeddingVector<T> {
    pub fn zeros(dim: usize) -> Self {
        EmbeddingVector {
            values: vec![T::zero(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> T {
        self.values.iter().map(|v| *v * *v).sum::<T>().sqrt()
    }

    /// Non-zero entries as `(index, value)`.
    pub fn nonzeros(&self) -> Vec<(usize, T)> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(|(i, v)| (i, *v))
            .collect()
    }
}

/// Slot of `token` within one channel's half of a `dim`-wide vector.
pub fn slot(channel: &str, token: &str, dim: usize) -> usize {
    let half = dim / 2;
    let h = fnv1a64(format!("{channel}:{token}").as_bytes());
    let base = if channel == "code" { half } else { 0 };
    base + (h % half as u64) as usize
}

/// Feature hashing: text tokens into `[0, dim/2)`, code tokens into
/// `[dim/2, dim)`, term frequencies, then L2 normalization.
pub fn embed<T: Scalar>(channels: &TokenChannels, dim: usize) -> Result<EmbeddingVector<T>> {
    if dim < 2 || !dim.is_multiple_of(2) {
        return Err(Error::Contract(format!("embedding dimension {dim} must be even and >= 2")));
    }
    let mut v = EmbeddingVector::zeros(dim);
    for t in &channels.text_tokens {
        v.values[slot("text", t, dim)] += T::one();
    }
    for t in &channels.code_tokens {
        v.values[slot("code", t, dim)] += T::one();
    }
    let norm = v.norm();
    if norm > T::zero() {
        for x in &mut v.values {
            *x = *x / norm;
        }
    }
    Ok(v)
}

/// Turns token channels into vectors. The hashing encoder is the built-in
/// implementation; a learned encoder can stand in behind the same interface.
pub trait Encoder<T: Scalar>: Send + Sync {
    fn dim(&self) -> usize;
    fn encode(&self, channels: &TokenChannels) -> Result<EmbeddingVector<T>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashingEncoder {
    pub dim: usize,
}

impl HashingEncoder {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 || !dim.is_multiple_of(2) {
            return Err(Error::Contract(format!("embedding dimension {dim} must be even and >= 2")));
        }
        Ok(HashingEncoder { dim })
    }
}

impl<T: Scalar> Encoder<T> for HashingEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, channels: &TokenChannels) -> Result<EmbeddingVector<T>> {
        embed(channels, self.dim)
    }
}
