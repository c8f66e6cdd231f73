use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Provenance record written next to every command's outputs.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config_sha256: String,
    /// Seeds as decimal strings: TOML integers stop at i64::MAX.
    pub data_seed: String,
    pub train_seed: String,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn new(command: &'static str, config: &[u8], data_seed: u64, train_seed: u64) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            config_sha256: format!("{:x}", Sha256::digest(config)),
            data_seed: data_seed.to_string(),
            train_seed: train_seed.to_string(),
            files: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let text = toml::to_string(self).map_err(|e| CliError::failure(e.to_string()))?;
        let path = dir.join("manifest.toml");
        fs::write(&path, text).map_err(|e| CliError::failure(format!("{}: {e}", path.display())))
    }
}
