//! Self-describing artifact envelopes: every command output embeds the
//! command name, its parameters, and the SHA-256 of each input file.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Input path -> sha256 hex digest.
    pub inputs: BTreeMap<String, String>,
    /// Echoed parameters, sorted by name.
    pub params: BTreeMap<String, String>,
}

impl Meta {
    pub fn new(command: &str) -> Meta {
        Meta {
            tool: "caus".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            inputs: BTreeMap::new(),
            params: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, path: &Path, content: &[u8]) {
        let mut hasher = Sha256::new();
        hasher.update(content);
        self.inputs
            .insert(path.display().to_string(), format!("sha256:{}", hex::encode(hasher.finalize())));
    }

    pub fn param(&mut self, key: &str, value: impl ToString) {
        self.params.insert(key.to_string(), value.to_string());
    }
}

/// Read a file, recording its hash into the meta block.
pub fn read_input(path: &Path, meta: &mut Meta) -> Result<String, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::MissingInput(format!("{}: {e}", path.display())))?;
    meta.input(path, &bytes);
    String::from_utf8(bytes)
        .map_err(|e| CliError::Parse(format!("{}: not valid UTF-8: {e}", path.display())))
}

pub fn write_output(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)
                .map_err(|e| CliError::Io(format!("creating {}: {e}", dir.display())))?;
        }
    }
    std::fs::write(path, contents)
        .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))
}
