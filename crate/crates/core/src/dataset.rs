//! Labelled samples stored as JSON lines.
//!
//! Each non-empty line is `{"x": [...], "label": n, "tags": {...}?}`. A line may
//! carry `"format": "depkit/1"`; a line consisting only of the format tag is a
//! header and is skipped.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, FORMAT_TAG};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sample {
    pub x: Vec<f64>,
    pub label: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tags: Option<BTreeMap<String, String>>,
}

impl Sample {
    pub fn new(x: Vec<f64>, label: usize) -> Self {
        Self { x, label, tags: None }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    #[serde(default)]
    format: Option<String>,
    #[serde(default)]
    x: Option<Vec<f64>>,
    #[serde(default)]
    label: Option<usize>,
    #[serde(default)]
    tags: Option<BTreeMap<String, String>>,
}

pub fn parse_jsonl(text: &str) -> Result<Vec<Sample>> {
    let mut samples = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let line: Line =
            serde_json::from_str(raw).map_err(|e| Error::MalformedInput(format!("dataset line {}: {e}", n + 1)))?;
        if let Some(f) = &line.format {
            if f != FORMAT_TAG {
                return Err(Error::MalformedInput(format!(
                    "dataset line {}: unsupported format {f:?}",
                    n + 1
                )));
            }
        }
        match (line.x, line.label) {
            (Some(x), Some(label)) => samples.push(Sample {
                x,
                label,
                tags: line.tags,
            }),
            (None, None) if line.format.is_some() && line.tags.is_none() => {}
            _ => {
                return Err(Error::MalformedInput(format!(
                    "dataset line {}: needs both \"x\" and \"label\"",
                    n + 1
                )))
            }
        }
    }
    Ok(samples)
}

pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Vec<Sample>> {
    parse_jsonl(&std::fs::read_to_string(path)?)
}

pub fn to_jsonl(samples: &[Sample]) -> String {
    let mut out = String::new();
    for s in samples {
        out.push_str(&serde_json::to_string(s).expect("sample serializes"));
        out.push('\n');
    }
    out
}
