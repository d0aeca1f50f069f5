//! Candidate generation: an HTTP chat-completions client and a scripted
//! generator for hermetic runs.

mod http;
mod script;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::promptkit::PromptBundle;

pub use http::HttpGenerator;
pub use script::{load_script, parse_script, ScriptEntry, ScriptError, ScriptedGenerator, ScriptedPlan};

pub const API_KEY_ENV: &str = "DYNAFIX_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    HttpChat,
    Scripted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub kind: GeneratorKind,
    pub endpoint_url: Option<String>,
    pub model_name: String,
    pub temperature: f64,
    pub request_timeout_ms: u64,
    pub max_retries: u32,
    pub script_path: Option<PathBuf>,
    /// First retry delay; later ones double, each with ±20% jitter.
    pub backoff_base_ms: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            kind: GeneratorKind::Scripted,
            endpoint_url: None,
            model_name: "gpt-4o".into(),
            temperature: 1.0,
            request_timeout_ms: 120_000,
            max_retries: 3,
            script_path: None,
            backoff_base_ms: 500,
        }
    }
}

impl GeneratorConfig {
    pub fn http(endpoint: impl Into<String>) -> Self {
        GeneratorConfig { kind: GeneratorKind::HttpChat, endpoint_url: Some(endpoint.into()), ..Self::default() }
    }

    pub fn scripted(path: impl Into<PathBuf>) -> Self {
        GeneratorConfig { kind: GeneratorKind::Scripted, script_path: Some(path.into()), ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(ConfigError::Temperature(self.temperature));
        }
        match self.kind {
            GeneratorKind::HttpChat if self.endpoint_url.is_none() => Err(ConfigError::MissingEndpoint),
            GeneratorKind::Scripted if self.script_path.is_none() => Err(ConfigError::MissingScript),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("temperature {0} outside [0, 2]")]
    Temperature(f64),
    #[error("http generator needs an endpoint url")]
    MissingEndpoint,
    #[error("scripted generator needs a script path")]
    MissingScript,
    #[error("environment variable {API_KEY_ENV} is not set")]
    MissingApiKey,
    #[error(transparent)]
    Script(#[from] ScriptError),
}

/// Identifies one generation request within a repair run.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AttemptKey {
    pub bug_id: String,
    pub b: u32,
    pub d: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum GenerationError {
    #[error("transport error: {detail}")]
    Transport { detail: String },
    #[error("endpoint returned status {code}")]
    BadStatus { code: u16 },
    #[error("malformed response: {detail}")]
    MalformedResponse { detail: String },
    #[error("no script entry for {bug_id} b={b} d={d}")]
    ScriptMiss { bug_id: String, b: u32, d: u32 },
    #[error("request timed out")]
    Timeout,
}

impl GenerationError {
    pub fn is_transient(&self) -> bool {
        match self {
            GenerationError::Transport { .. } => true,
            GenerationError::BadStatus { code } => *code == 429 || (500..600).contains(code),
            _ => false,
        }
    }
}

pub trait Generator: Send + Sync {
    fn generate(&self, prompt: &PromptBundle, key: &AttemptKey) -> Result<String, GenerationError>;
}

#[derive(Serialize)]
struct Message<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    temperature: f64,
    messages: [Message<'a>; 4],
}

/// The request body sent for `prompt`. Field order is fixed, so the bytes are
/// stable for identical inputs.
pub fn chat_payload(prompt: &PromptBundle, model: &str, temperature: f64) -> String {
    let req = ChatRequest {
        model,
        temperature,
        messages: [
            Message { role: "system", content: &prompt.system_text },
            Message { role: "user", content: &prompt.example_input },
            Message { role: "assistant", content: &prompt.example_output },
            Message { role: "user", content: &prompt.debug_info },
        ],
    };
    serde_json::to_string(&req).expect("chat payload serializes")
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

pub fn prompt_hash(prompt: &PromptBundle, model: &str, temperature: f64) -> String {
    sha256_hex(chat_payload(prompt, model, temperature).as_bytes())
}

/// One line of the generation log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub bug_id: String,
    pub attempt_index: usize,
    pub b: u32,
    pub d: u32,
    pub prompt_hash: String,
    pub raw_output: String,
    pub latency_ms: u64,
    pub prompt_chars: usize,
    pub completion_chars: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Builds the generator described by `config`. The HTTP generator reads its
/// key from [`API_KEY_ENV`].
pub fn build_generator(config: &GeneratorConfig) -> Result<Box<dyn Generator>, ConfigError> {
    config.validate()?;
    match config.kind {
        GeneratorKind::Scripted => {
            let plan = load_script(config.script_path.as_ref().expect("validated"))?;
            Ok(Box::new(ScriptedGenerator::new(plan)))
        }
        GeneratorKind::HttpChat => {
            let key = std::env::var(API_KEY_ENV).map_err(|_| ConfigError::MissingApiKey)?;
            Ok(Box::new(HttpGenerator::new(config.clone(), key)))
        }
    }
}

/// One-shot convenience over [`build_generator`].
pub fn generate(prompt: &PromptBundle, config: &GeneratorConfig, key: &AttemptKey) -> Result<String, GenerationError> {
    let generator =
        build_generator(config).map_err(|e| GenerationError::Transport { detail: format!("configuration: {e}") })?;
    generator.generate(prompt, key)
}

#[cfg(test)]
mod tests;
