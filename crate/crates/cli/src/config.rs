//! Run configuration: defaults, then a JSON file, then command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sono::{Config, LevelOrder, MaxlenRule, MissingPolicy, Mode, NuMethod};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

/// Everything needed to repeat a scoring run. Stored in `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub mode: Mode,
    pub alpha: f64,
    pub r: f64,
    pub prune: bool,
    pub max_len: Option<usize>,
    pub maxlen_rule: MaxlenRule,
    pub probs: Option<PathBuf>,
    pub out: PathBuf,
    pub format: Vec<Format>,
    pub drop_cols: Vec<String>,
    pub missing: MissingPolicy,
    pub missing_markers: Vec<String>,
    pub level_order: LevelOrder,
    pub delimiter: char,
    pub threads: Option<usize>,
    pub nu_method: NuMethod,
    pub cell_cap: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let core = Config::default();
        let ingest = sono::IngestOptions::default();
        Self {
            input: None,
            mode: core.mode,
            alpha: core.alpha,
            r: core.r,
            prune: core.prune,
            max_len: core.max_len,
            maxlen_rule: core.maxlen_rule,
            probs: None,
            out: PathBuf::from("sono-out"),
            format: vec![Format::Csv, Format::Json],
            drop_cols: Vec::new(),
            missing: ingest.missing,
            missing_markers: ingest.missing_markers,
            level_order: ingest.level_order,
            delimiter: ingest.delimiter as char,
            threads: core.threads,
            nu_method: core.nu_method,
            cell_cap: core.cell_cap,
        }
    }
}

impl RunConfig {
    /// Reads a flat configuration document, or the `config` member of a
    /// previous `run.json`.
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let doc = match value.get("config") {
            Some(inner) if value.get("maxlen").is_some() => inner.clone(),
            _ => value,
        };
        serde_json::from_value(doc).with_context(|| format!("invalid configuration in {}", path.display()))
    }

    pub fn core(&self) -> Config {
        Config {
            mode: self.mode,
            alpha: self.alpha,
            r: self.r,
            prune: self.prune,
            max_len: self.max_len,
            maxlen_rule: self.maxlen_rule,
            nu_method: self.nu_method,
            cell_cap: self.cell_cap,
            threads: self.threads,
        }
    }

    pub fn ingest(&self) -> anyhow::Result<sono::IngestOptions> {
        if !self.delimiter.is_ascii() {
            bail!("delimiter must be a single ASCII character");
        }
        Ok(sono::IngestOptions {
            delimiter: self.delimiter as u8,
            missing_markers: self.missing_markers.clone(),
            missing: self.missing,
            level_order: self.level_order,
            drop_columns: self.drop_cols.clone(),
            ..sono::IngestOptions::default()
        })
    }

    pub fn wants(&self, f: Format) -> bool {
        self.format.contains(&f)
    }
}

/// Parses a probability file: variable name → list of `{label: probability}`
/// objects (a single object is accepted too). An empty file means none.
pub fn read_probabilities(path: &Path) -> anyhow::Result<BTreeMap<String, BTreeMap<String, f64>>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if text.trim().is_empty() {
        return Ok(BTreeMap::new());
    }
    let raw: BTreeMap<String, serde_json::Value> =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let mut out = BTreeMap::new();
    for (var, value) in raw {
        let objects = match value {
            serde_json::Value::Array(items) => items,
            obj @ serde_json::Value::Object(_) => vec![obj],
            _ => bail!("probabilities for {var:?} must be a list of {{label: probability}} objects"),
        };
        let mut levels = BTreeMap::new();
        for obj in objects {
            let map: BTreeMap<String, f64> = serde_json::from_value(obj)
                .with_context(|| format!("probabilities for {var:?} must map labels to numbers"))?;
            for (label, p) in map {
                if levels.insert(label.clone(), p).is_some() {
                    bail!("level {label:?} of {var:?} listed twice");
                }
            }
        }
        out.insert(var, levels);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_document_fills_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"alpha": 0.1, "mode": "frequent"}"#).unwrap();
        let c = RunConfig::from_file(&path).unwrap();
        assert_eq!(c.alpha, 0.1);
        assert_eq!(c.mode, Mode::Frequent);
        assert_eq!(c.r, 2.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"alpah": 0.1}"#).unwrap();
        assert!(RunConfig::from_file(&path).is_err());
    }

    #[test]
    fn probability_lists_and_objects() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        std::fs::write(&path, r#"{"a": [{"x": 0.25}, {"y": 0.75}], "b": {"u": 1.0}}"#).unwrap();
        let p = read_probabilities(&path).unwrap();
        assert_eq!(p["a"]["y"], 0.75);
        assert_eq!(p["b"]["u"], 1.0);
        std::fs::write(&path, "  \n").unwrap();
        assert!(read_probabilities(&path).unwrap().is_empty());
    }
}
