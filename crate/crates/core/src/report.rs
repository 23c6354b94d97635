//! Serializable analysis report shared by every CLI command.
//!
//! The `payload` is the engine result. Everything that may differ between
//! two runs on the same inputs (the timestamp) lives outside it, and
//! `payload_sha256` hashes its canonical (key-sorted, compact) encoding.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::{Result, FORMAT_TAG};

/// Safety-case solution node a report provides evidence for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GsnTag {
    Sn1,
    Sn2,
    Sn6,
    Sn8,
    Sn9,
    Sn10,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputFile {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub format: String,
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub args: Vec<String>,
    pub inputs: Vec<InputFile>,
    pub gsn_tag: GsnTag,
    pub payload: Value,
    pub payload_sha256: String,
    pub generated_unix: u64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: impl AsRef<Path>) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

/// Compact JSON with sorted object keys.
pub fn canonical_json(v: &Value) -> String {
    // serde_json's map is ordered by key without the preserve_order feature
    serde_json::to_string(v).expect("value serializes")
}

impl AnalysisReport {
    pub fn new(subcommand: &str, args: Vec<String>, inputs: Vec<InputFile>, gsn_tag: GsnTag, payload: Value) -> Self {
        let payload_sha256 = sha256_hex(canonical_json(&payload).as_bytes());
        let generated_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        Self {
            format: FORMAT_TAG.into(),
            tool: "depkit".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
            args,
            inputs,
            gsn_tag,
            payload,
            payload_sha256,
            generated_unix,
        }
    }

    pub fn payload_is_consistent(&self) -> bool {
        sha256_hex(canonical_json(&self.payload).as_bytes()) == self.payload_sha256
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn payload_hash_ignores_key_order() {
        let a: Value = serde_json::from_str(r#"{"b":1,"a":[1,2]}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"a":[1,2],"b":1}"#).unwrap();
        let ra = AnalysisReport::new("x", vec![], vec![], GsnTag::Sn1, a);
        let rb = AnalysisReport::new("x", vec![], vec![], GsnTag::Sn1, b);
        assert_eq!(ra.payload_sha256, rb.payload_sha256);
        assert!(ra.payload_is_consistent());
        assert_eq!(canonical_json(&ra.payload), r#"{"a":[1,2],"b":1}"#);
    }

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
