//! JSON sidecar written next to every output file.
//!
//! `args` holds the fully resolved command line, so replaying it needs
//! neither the original config file nor the original defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use bcs_edge_core::quadrature::GridPolicy;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowProvenance {
    pub index: usize,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collapsed: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RowProvenance {
    pub fn new(index: usize, label: impl Into<String>) -> Self {
        Self {
            index,
            label: label.into(),
            evaluations: None,
            grid_nodes: None,
            collapsed: None,
            error: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config: BTreeMap<String, String>,
    pub seeds: Vec<u64>,
    pub grid_policy: GridPolicy,
    pub tool_version: String,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
    pub output: String,
    pub format: String,
    pub rows: Vec<RowProvenance>,
}

pub fn parse_manifest(text: &str) -> Result<RunManifest, serde_json::Error> {
    serde_json::from_str(text)
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_os_string();
    s.push(".manifest.json");
    PathBuf::from(s)
}

impl RunManifest {
    /// Replayable argument list, optionally redirected to another output.
    pub fn replay_args(&self, out: Option<&Path>) -> Vec<String> {
        let mut args = self.args.clone();
        if let Some(out) = out {
            let out = out.display().to_string();
            match args.iter().position(|a| a == "--out") {
                Some(i) if i + 1 < args.len() => args[i + 1] = out,
                _ => {
                    args.push("--out".into());
                    args.push(out);
                }
            }
        }
        args
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunManifest {
        RunManifest {
            command: "tc-bulk".into(),
            args: vec!["tc-bulk".into(), "--mu".into(), "1".into(), "--out".into(), "a.csv".into()],
            config: BTreeMap::from([("mu".to_string(), "1".to_string())]),
            seeds: vec![],
            grid_policy: GridPolicy::default(),
            tool_version: "0.1.0".into(),
            started_unix: 0,
            wall_clock_seconds: 0.5,
            output: "a.csv".into(),
            format: "csv".into(),
            rows: vec![RowProvenance::new(0, "v=0.4")],
        }
    }

    #[test]
    fn round_trip() {
        let m = sample();
        let text = serde_json::to_string_pretty(&m).unwrap();
        assert_eq!(parse_manifest(&text).unwrap(), m);
        assert!(parse_manifest("{}").is_err());
    }

    #[test]
    fn redirects_output() {
        let m = sample();
        let args = m.replay_args(Some(Path::new("b.csv")));
        assert_eq!(args[4], "b.csv");
        assert_eq!(manifest_path(Path::new("x/out.csv")), PathBuf::from("x/out.csv.manifest.json"));
    }
}
