//! Keyword lists for semantic matching and resource-release functions for
//! structural matching.
//!
//! The file format is TOML with a top-level `common` list and one table per
//! warning type:
//!
//! ```toml
//! common = ["fix", "bug"]
//!
//! [null_dereference]
//! type_keywords = ["null dereference", "null pointer"]
//!
//! [resource_leak]
//! type_keywords = ["leak"]
//! free_functions = ["free", "fclose"]
//! ```
//!
//! Tables that are left out keep their built-in defaults.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::WarningType;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeKeywords {
    pub type_keywords: Vec<String>,
    #[serde(default)]
    pub free_functions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordConfig {
    pub common: Vec<String>,
    pub types: BTreeMap<WarningType, TypeKeywords>,
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

impl Default for KeywordConfig {
    fn default() -> Self {
        let mut types = BTreeMap::new();
        types.insert(
            WarningType::UninitializedVariable,
            TypeKeywords {
                type_keywords: strings(&[
                    "initial",
                    "initialize",
                    "initialized",
                    "initializes",
                    "initializing",
                    "initialise",
                    "initialised",
                    "initialization",
                    "initialisation",
                    "uninitialized",
                    "uninitialised",
                    "init",
                    "define",
                    "defined",
                    "assign",
                    "assigned",
                    "assignment",
                ]),
                free_functions: Vec::new(),
            },
        );
        types.insert(
            WarningType::NullDereference,
            TypeKeywords {
                type_keywords: strings(&[
                    "null dereference",
                    "null dereferences",
                    "null deref",
                    "null pointer",
                    "null pointers",
                ]),
                free_functions: Vec::new(),
            },
        );
        types.insert(
            WarningType::ResourceLeak,
            TypeKeywords {
                type_keywords: strings(&[
                    "resource", "resources", "leak", "leaks", "leaked", "leaking",
                ]),
                free_functions: strings(&["free", "fclose", "close", "closedir", "pclose", "munmap"]),
            },
        );
        types.insert(
            WarningType::DeadStore,
            TypeKeywords {
                type_keywords: strings(&["dead store", "dead stores", "unused", "never", "never used"]),
                free_functions: Vec::new(),
            },
        );
        KeywordConfig {
            common: strings(&[
                "fix", "fixes", "fixed", "repair", "bug", "bugs", "warning", "warnings", "solve", "solved",
                "problem", "error", "issue", "crash", "leak",
            ]),
            types,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KeywordFile {
    common: Option<Vec<String>>,
    uninitialized_variable: Option<TypeKeywords>,
    null_dereference: Option<TypeKeywords>,
    resource_leak: Option<TypeKeywords>,
    dead_store: Option<TypeKeywords>,
}

impl KeywordConfig {
    pub fn type_keywords(&self, t: WarningType) -> &[String] {
        self.types.get(&t).map_or(&[], |k| k.type_keywords.as_slice())
    }

    pub fn free_functions(&self, t: WarningType) -> &[String] {
        self.types.get(&t).map_or(&[], |k| k.free_functions.as_slice())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: KeywordFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut cfg = KeywordConfig::default();
        if let Some(common) = file.common {
            cfg.common = common;
        }
        let sections = [
            (WarningType::UninitializedVariable, file.uninitialized_variable),
            (WarningType::NullDereference, file.null_dereference),
            (WarningType::ResourceLeak, file.resource_leak),
            (WarningType::DeadStore, file.dead_store),
        ];
        for (t, section) in sections {
            if let Some(mut s) = section {
                if t == WarningType::ResourceLeak && s.free_functions.is_empty() {
                    s.free_functions = cfg.free_functions(t).to_vec();
                }
                cfg.types.insert(t, s);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |what: &str, list: &[String]| -> Result<()> {
            if list.is_empty() {
                return Err(Error::Config(format!("{what}: keyword list is empty")));
            }
            for k in list {
                if k.trim().is_empty() || k.to_lowercase() != *k {
                    return Err(Error::Config(format!("{what}: keyword `{k}` must be non-empty lowercase")));
                }
            }
            Ok(())
        };
        check("common", &self.common)?;
        for t in WarningType::ALL {
            check(t.as_str(), self.type_keywords(t))?;
        }
        if self.free_functions(WarningType::ResourceLeak).is_empty() {
            return Err(Error::Config("resource_leak: free_functions is empty".into()));
        }
        Ok(())
    }
}
