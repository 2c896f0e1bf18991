//! Tool-wide configuration, read from the file named by `ACW_CONFIG`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::WarningType;

pub const CONFIG_ENV: &str = "ACW_CONFIG";

/// Analyzer bug-type code to warning type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BugTypeMap(pub BTreeMap<String, WarningType>);

impl Default for BugTypeMap {
    fn default() -> Self {
        let pairs = [
            ("UNINITIALIZED_VALUE", WarningType::UninitializedVariable),
            ("PULSE_UNINITIALIZED_VALUE", WarningType::UninitializedVariable),
            ("UNINITIALIZED_VARIABLE", WarningType::UninitializedVariable),
            ("NULL_DEREFERENCE", WarningType::NullDereference),
            ("NULLPTR_DEREFERENCE", WarningType::NullDereference),
            ("RESOURCE_LEAK", WarningType::ResourceLeak),
            ("PULSE_RESOURCE_LEAK", WarningType::ResourceLeak),
            ("DEAD_STORE", WarningType::DeadStore),
        ];
        BugTypeMap(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }
}

impl BugTypeMap {
    pub fn lookup(&self, bug_type: &str) -> Option<WarningType> {
        self.0.get(bug_type).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcwConfig {
    /// Shell command run once per revision in live mode. `{checkout_dir}` and
    /// `{out_file}` are substituted before execution.
    pub analyzer_cmd: Option<String>,
    /// Directory of pre-generated `<sha>.json` reports for live mode.
    pub reports_dir: Option<PathBuf>,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub decision_threshold: f64,
    pub bug_types: BugTypeMap,
}

impl Default for AcwConfig {
    fn default() -> Self {
        AcwConfig {
            analyzer_cmd: None,
            reports_dir: None,
            embed_dim: 1024,
            hidden_dim: 64,
            decision_threshold: 0.5,
            bug_types: BugTypeMap::default(),
        }
    }
}

impl AcwConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Loads the file named by `ACW_CONFIG`, or the defaults when unset.
    pub fn from_env() -> Result<Self> {
        match std::env::var_os(CONFIG_ENV) {
            Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
            _ => Ok(Self::default()),
        }
    }

    /// Expands the analyzer command template for one checkout.
    pub fn analyzer_command(&self, checkout_dir: &Path, out_file: &Path) -> Option<String> {
        self.analyzer_cmd.as_ref().map(|t| {
            t.replace("{checkout_dir}", &checkout_dir.to_string_lossy())
                .replace("{out_file}", &out_file.to_string_lossy())
        })
    }
}
