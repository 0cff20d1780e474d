//! Flat `key = value` configuration files.
//!
//! Keys mirror the long flag names (`grid-points`, `v-min`, ...); `_` is
//! accepted in place of `-`. Lines starting with `#` are comments, and a
//! `#` after a value starts a trailing comment. List-valued keys such as
//! `v` take comma-separated values.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("key `{key}`: cannot parse `{value}`")]
    Invalid { key: String, value: String },
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

fn normalize_key(raw: &str) -> Option<String> {
    let key = raw.trim().replace('_', "-").to_ascii_lowercase();
    let valid = !key.is_empty()
        && key.chars().all(|c| c.is_ascii_alphanumeric() || c == '-')
        && !key.starts_with('-');
    valid.then_some(key)
}

pub fn parse_config(text: &str) -> Result<ConfigFile, ConfigError> {
    let mut entries = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            msg: "expected `key = value`".into(),
        })?;
        let key = normalize_key(k).ok_or_else(|| ConfigError::Syntax {
            line,
            msg: format!("invalid key `{}`", k.trim()),
        })?;
        let value = v.trim();
        if value.is_empty() {
            return Err(ConfigError::Syntax {
                line,
                msg: format!("empty value for `{key}`"),
            });
        }
        if entries.insert(key.clone(), value.to_string()).is_some() {
            return Err(ConfigError::DuplicateKey { line, key });
        }
    }
    Ok(ConfigFile { entries })
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        parse_config(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        self.get(key)
            .map(|v| {
                v.parse().map_err(|_| ConfigError::Invalid {
                    key: key.into(),
                    value: v.into(),
                })
            })
            .transpose()
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, ConfigError> {
        let Some(v) = self.get(key) else {
            return Ok(Vec::new());
        };
        v.split(',')
            .map(|item| {
                item.trim().parse().map_err(|_| ConfigError::Invalid {
                    key: key.into(),
                    value: v.into(),
                })
            })
            .collect()
    }
}
