use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AttemptKey, GenerationError, Generator};
use crate::promptkit::PromptBundle;

/// One scripted response. `b`, `d` and `requires` narrow the match; an entry
/// with `bug: "*"` applies to every bug. `requires` lists substrings that must
/// all occur in the prompt's debugging information.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEntry {
    pub bug: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub requires: Vec<String>,
    pub output: String,
}

impl ScriptEntry {
    pub fn exact(bug: &str, b: u32, d: u32, output: impl Into<String>) -> Self {
        ScriptEntry { bug: bug.into(), b: Some(b), d: Some(d), requires: Vec::new(), output: output.into() }
    }

    fn matches(&self, key: &AttemptKey, debug_info: &str) -> bool {
        (self.bug == "*" || self.bug == key.bug_id)
            && self.b.is_none_or(|b| b == key.b)
            && self.d.is_none_or(|d| d == key.d)
            && self.requires.iter().all(|r| debug_info.contains(r.as_str()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedPlan {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<String>,
    #[serde(default)]
    pub entries: Vec<ScriptEntry>,
}

impl ScriptedPlan {
    /// First matching entry in file order, else the default.
    pub fn lookup(&self, key: &AttemptKey, debug_info: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.matches(key, debug_info))
            .map(|e| e.output.as_str())
            .or(self.default.as_deref())
    }

    fn check_duplicates(&self) -> Result<(), ScriptError> {
        let mut seen = HashSet::new();
        for (i, e) in self.entries.iter().enumerate() {
            if !seen.insert((&e.bug, e.b, e.d, &e.requires)) {
                return Err(ScriptError::Duplicate { index: i, bug: e.bug.clone(), b: e.b, d: e.d });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScriptError {
    #[error("cannot read script {path}: {detail}")]
    Io { path: String, detail: String },
    #[error("script line {line}, column {column}: {detail}")]
    Syntax { line: usize, column: usize, detail: String },
    #[error("entries[{index}] duplicates an earlier key (bug {bug}, b {b:?}, d {d:?})")]
    Duplicate { index: usize, bug: String, b: Option<u32>, d: Option<u32> },
}

pub fn parse_script(text: &str) -> Result<ScriptedPlan, ScriptError> {
    let plan: ScriptedPlan = serde_json::from_str(text)
        .map_err(|e| ScriptError::Syntax { line: e.line(), column: e.column(), detail: e.to_string() })?;
    plan.check_duplicates()?;
    Ok(plan)
}

pub fn load_script(path: &Path) -> Result<ScriptedPlan, ScriptError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ScriptError::Io { path: path.display().to_string(), detail: e.to_string() })?;
    parse_script(&text)
}

pub struct ScriptedGenerator {
    plan: ScriptedPlan,
}

impl ScriptedGenerator {
    pub fn new(plan: ScriptedPlan) -> Self {
        ScriptedGenerator { plan }
    }
}

impl Generator for ScriptedGenerator {
    fn generate(&self, prompt: &PromptBundle, key: &AttemptKey) -> Result<String, GenerationError> {
        self.plan
            .lookup(key, &prompt.debug_info)
            .map(str::to_string)
            .ok_or_else(|| GenerationError::ScriptMiss { bug_id: key.bug_id.clone(), b: key.b, d: key.d })
    }
}
