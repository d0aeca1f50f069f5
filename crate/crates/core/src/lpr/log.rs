use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LprConfig, LprError, RepairOutcome};
use crate::patchgen::GenerationError;
use crate::validator::ValidationVerdict;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub bug_id: String,
    pub config_hash: String,
    pub config: LprConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub seq: usize,
    pub b: u32,
    pub d: u32,
    pub prompt_hash: String,
    /// Digest of the printed program whose traces fed the prompt.
    pub traced_program_hash: String,
    /// Digest of the program after splicing in this attempt's patch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patched_program_hash: Option<String>,
    /// Raw generator output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation_error: Option<GenerationError>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extraction_error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patch_source: Option<String>,
    pub verdict: ValidationVerdict,
    pub passed: usize,
    pub failed: usize,
    /// The verdict line shown in later prompts.
    pub result: String,
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub outcome: RepairOutcome,
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogRecord {
    Session(SessionHeader),
    Attempt(AttemptRecord),
    Outcome(OutcomeRecord),
}

/// Parses a session log; blank lines are skipped.
pub fn read_session_log(path: &Path) -> Result<Vec<LogRecord>, LprError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| LprError::Io { path: path.display().to_string(), detail: e.to_string() })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(line).map_err(|e| LprError::LogCorrupt { line: i + 1, detail: e.to_string() })?;
        out.push(rec);
    }
    Ok(out)
}
