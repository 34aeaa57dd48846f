//! Run manifests: everything needed to repeat a run and check its outputs.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::tasks::Artifact;

pub const TOOL: &str = "hrsnn";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub task: String,
    pub config_path: String,
    pub config_sha256: String,
    /// The config file verbatim; a rerun parses this rather than the path.
    pub config_text: String,
    /// `section.key=value` overrides in the order they were applied.
    pub overrides: Vec<String>,
    pub seeds: Vec<u64>,
    pub workers: usize,
    /// The fully resolved configuration, for reading only.
    pub resolved: serde_json::Value,
    pub outputs: Vec<OutputRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn records(artifacts: &[Artifact]) -> Vec<OutputRecord> {
    artifacts
        .iter()
        .map(|a| OutputRecord {
            file: a.name.clone(),
            sha256: sha256_hex(&a.bytes),
            bytes: a.bytes.len(),
        })
        .collect()
}

impl Manifest {
    pub fn read(path: &Path) -> std::io::Result<Result<Self, serde_json::Error>> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text))
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Files whose hash differs from `other`, or that exist in only one of
    /// the two, restricted to names ending in `suffix`.
    pub fn mismatches(&self, other: &[OutputRecord], suffix: &str) -> Vec<String> {
        let mut out = Vec::new();
        for r in self.outputs.iter().filter(|r| r.file.ends_with(suffix)) {
            match other.iter().find(|o| o.file == r.file) {
                Some(o) if o.sha256 == r.sha256 => {}
                Some(_) => out.push(format!("{}: content differs", r.file)),
                None => out.push(format!("{}: not produced", r.file)),
            }
        }
        for o in other.iter().filter(|o| o.file.ends_with(suffix)) {
            if !self.outputs.iter().any(|r| r.file == o.file) {
                out.push(format!("{}: not in manifest", o.file));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn mismatch_report_covers_changed_missing_and_extra() {
        let rec = |f: &str, h: &str| OutputRecord {
            file: f.into(),
            sha256: h.into(),
            bytes: 0,
        };
        let m = Manifest {
            tool: TOOL.into(),
            version: "0".into(),
            task: "mc-eval".into(),
            config_path: String::new(),
            config_sha256: String::new(),
            config_text: String::new(),
            overrides: vec![],
            seeds: vec![0],
            workers: 1,
            resolved: serde_json::Value::Null,
            outputs: vec![rec("a.csv", "1"), rec("b.csv", "2"), rec("c.json", "3")],
        };
        let now = [rec("a.csv", "1"), rec("b.csv", "9"), rec("d.csv", "4"), rec("c.json", "0")];
        let mm = m.mismatches(&now, ".csv");
        assert_eq!(mm, vec!["b.csv: content differs".to_string(), "d.csv: not in manifest".to_string()]);
        assert!(m.mismatches(&now[..2], ".csv").len() == 1);
    }
}
