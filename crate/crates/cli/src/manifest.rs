use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use sha2::{Digest, Sha256};

/// SHA-256 of the git blob encoding `blob <len>\0<bytes>`.
pub fn blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex(&h.finalize())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to reproduce a run. Contains no timestamps, so
/// identical runs produce identical manifests.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool_version: &'static str,
    pub command: String,
    pub flags: BTreeMap<String, serde_json::Value>,
    pub seed: Option<u64>,
    pub input_hash: String,
    pub outputs: Vec<OutputFile>,
}

impl RunManifest {
    pub fn new(command: &str, input: &[u8]) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            flags: BTreeMap::new(),
            seed: None,
            input_hash: blob_hash(input),
            outputs: Vec::new(),
        }
    }

    pub fn flag(&mut self, name: &str, value: impl Serialize) {
        self.flags.insert(
            name.to_string(),
            serde_json::to_value(value).expect("plain flag value"),
        );
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plain data");
        s.push('\n');
        s
    }
}
