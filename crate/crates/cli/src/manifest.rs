//! Reproducibility manifest written next to every data output.

use serde::Serialize;
use std::path::Path;

use crate::CliError;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<String>,
    pub config_digest: Option<String>,
    pub seed: u64,
    pub tool_version: String,
    pub started: String,
    pub finished: String,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let body = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Io(format!("manifest encode: {e}")))?;
        crate::write_atomic(&dir.join("manifest.json"), body.as_bytes())
    }
}

pub fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339()
}
