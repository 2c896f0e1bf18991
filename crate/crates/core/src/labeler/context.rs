//! Identifier extraction from analyzer qualifiers.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::model::{Warning, WarningType};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextIdentifiers {
    pub variable: Option<String>,
    pub pointer: Option<String>,
    pub function: Option<String>,
}

impl ContextIdentifiers {
    pub fn is_empty(&self) -> bool {
        self.variable.is_none() && self.pointer.is_none() && self.function.is_none()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        [&self.variable, &self.pointer, &self.function]
            .into_iter()
            .filter_map(|x| x.as_deref())
    }
}

// Identifiers may be wrapped in backticks or quotes, and infer sometimes
// prefixes address-taken variables with `&`.
const ID: &str = r#"[`'"]?&?([A-Za-z_][A-Za-z0-9_]*)(?:\(\))?[`'"]?"#;

struct Templates {
    uninit: Regex,
    null: Regex,
    leak_var: Regex,
    leak_fn: Regex,
    dead: Regex,
}

fn templates() -> &'static Templates {
    static T: OnceLock<Templates> = OnceLock::new();
    T.get_or_init(|| {
        let re = |p: String| Regex::new(&p).expect("static template regex");
        Templates {
            uninit: re(format!(r"(?i)value read from {ID}")),
            null: re(format!(r"(?i)^(?:pointer\s+)?{ID}\s+last assigned on line")),
            leak_var: re(format!(r"(?i)acquired to {ID}")),
            leak_fn: re(format!(r"(?i)by call to {ID}")),
            dead: re(format!(r"(?i)value written to {ID}")),
        }
    })
}

fn capture(re: &Regex, text: &str) -> Option<String> {
    re.captures(text).map(|c| c[1].to_string())
}

/// Pulls the identifiers named by the qualifier template of the warning's type.
pub fn extract_context_identifiers(warning: &Warning) -> ContextIdentifiers {
    let t = templates();
    let q = warning.qualifier.trim();
    match warning.warning_type {
        WarningType::UninitializedVariable => ContextIdentifiers {
            variable: capture(&t.uninit, q),
            ..Default::default()
        },
        WarningType::NullDereference => ContextIdentifiers {
            pointer: capture(&t.null, q),
            ..Default::default()
        },
        WarningType::ResourceLeak => ContextIdentifiers {
            variable: capture(&t.leak_var, q),
            function: capture(&t.leak_fn, q),
            ..Default::default()
        },
        WarningType::DeadStore => ContextIdentifiers {
            variable: capture(&t.dead, q),
            ..Default::default()
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(t: WarningType, q: &str) -> Warning {
        Warning {
            id: "w".into(),
            warning_type: t,
            qualifier: q.into(),
            file: "a.c".into(),
            line: 1,
            procedure: "f".into(),
            revision_index: 0,
        }
    }

    #[test]
    fn uninitialized_variable() {
        let ids = extract_context_identifiers(&w(
            WarningType::UninitializedVariable,
            "The value read from `len` was never initialized.",
        ));
        assert_eq!(ids.variable.as_deref(), Some("len"));
        assert!(ids.pointer.is_none() && ids.function.is_none());
        let bare = extract_context_identifiers(&w(
            WarningType::UninitializedVariable,
            "The value read from len was never initialized.",
        ));
        assert_eq!(bare.variable.as_deref(), Some("len"));
    }

    #[test]
    fn null_dereference() {
        let ids = extract_context_identifiers(&w(
            WarningType::NullDereference,
            "`p` last assigned on line 12 could be null and is dereferenced at line 14",
        ));
        assert_eq!(ids.pointer.as_deref(), Some("p"));
        let infer_style = extract_context_identifiers(&w(
            WarningType::NullDereference,
            "pointer `buf` last assigned on line 3 could be null and is dereferenced at line 5.",
        ));
        assert_eq!(infer_style.pointer.as_deref(), Some("buf"));
    }

    #[test]
    fn resource_leak() {
        let ids = extract_context_identifiers(&w(
            WarningType::ResourceLeak,
            "Resource acquired to `fp` by call to `fopen()` at line 4 is not released after line 9",
        ));
        assert_eq!(ids.variable.as_deref(), Some("fp"));
        assert_eq!(ids.function.as_deref(), Some("fopen"));
        let typed = extract_context_identifiers(&w(
            WarningType::ResourceLeak,
            "resource of type `FILE` acquired by call to `fopen()` at line 4 is not released after line 9",
        ));
        assert_eq!(typed.variable, None);
        assert_eq!(typed.function.as_deref(), Some("fopen"));
    }

    #[test]
    fn dead_store() {
        let ids = extract_context_identifiers(&w(
            WarningType::DeadStore,
            "The value written to &rc (type int) is never used.",
        ));
        assert_eq!(ids.variable.as_deref(), Some("rc"));
    }

    #[test]
    fn unrecognized_text() {
        for t in WarningType::ALL {
            assert!(extract_context_identifiers(&w(t, "unrecognized text")).is_empty());
        }
    }
}
