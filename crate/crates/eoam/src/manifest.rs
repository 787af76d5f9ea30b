use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::error::{AppError, AppResult};
use crate::tables::sha256_hex;

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance record written next to every set of outputs. `hash` covers
/// the command, the config contents, the table provenance and the tool
/// version; the timestamp and paths are informational only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub hash: String,
    pub command: String,
    pub tool_version: String,
    pub config_paths: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table_provenance: Option<String>,
    pub output_dir: String,
    pub timestamp_unix: u64,
}

impl RunManifest {
    pub fn new(
        command: &str,
        configs: &[(&Path, &str)],
        table_provenance: Option<&str>,
        output_dir: &Path,
    ) -> Self {
        let hash = content_hash(
            command,
            &configs.iter().map(|c| c.1).collect::<Vec<_>>(),
            table_provenance,
        );
        Self {
            hash,
            command: command.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            config_paths: configs.iter().map(|c| c.0.display().to_string()).collect(),
            table_provenance: table_provenance.map(str::to_string),
            output_dir: output_dir.display().to_string(),
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
        }
    }

    pub fn write(&self, dir: &Path) -> AppResult<()> {
        let text = toml::to_string(self).map_err(|e| AppError::Data(e.to_string()))?;
        write_file(&dir.join(MANIFEST_FILE), text.as_bytes())
    }
}

pub fn content_hash(command: &str, configs: &[&str], table_provenance: Option<&str>) -> String {
    let mut text = format!("eoam {TOOL_VERSION}\ncommand {command}\n");
    for c in configs {
        text.push_str(&format!("config {}\n{c}\n", c.len()));
    }
    if let Some(p) = table_provenance {
        text.push_str(&format!("tables {p}\n"));
    }
    sha256_hex(text.as_bytes())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> AppResult<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(AppError::io(parent))?;
    }
    std::fs::write(path, bytes).map_err(AppError::io(path))
}
