use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use langid_fusion::hash::sha256_hex;
use serde::Serialize;

/// Record of one command run: enough to repeat it and to check its outputs.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub config_hash: String,
    /// Input and output paths mapped to the SHA-256 of their contents.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub versions: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new<C: Serialize>(command: &str, argv: &[String], config: &C) -> Self {
        let config = serde_json::to_value(config).expect("config serializes");
        let config_hash = sha256_hex(config.to_string().as_bytes());
        let mut versions = BTreeMap::new();
        versions.insert("langid-fusion".to_string(), env!("CARGO_PKG_VERSION").to_string());
        Manifest {
            command: command.to_string(),
            // argv[0] is the binary's location, which says nothing about the run.
            argv: argv.iter().skip(1).cloned().collect(),
            config,
            config_hash,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            versions,
        }
    }

    pub fn input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.insert(path.display().to_string(), sha256_hex(bytes));
    }

    pub fn output(&mut self, path: &Path, bytes: &[u8]) {
        self.outputs.insert(path.display().to_string(), sha256_hex(bytes));
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(path, text)
    }
}

/// `dir/name.json` -> `dir/name.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    output.with_file_name(format!("{stem}.manifest.json"))
}
