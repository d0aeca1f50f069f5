use std::thread;
use std::time::Duration;

use rand::Rng;

use super::{chat_payload, AttemptKey, GenerationError, Generator, GeneratorConfig};
use crate::promptkit::PromptBundle;

pub struct HttpGenerator {
    config: GeneratorConfig,
    api_key: String,
    client: reqwest::blocking::Client,
}

impl HttpGenerator {
    pub fn new(config: GeneratorConfig, api_key: String) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.request_timeout_ms))
            .build()
            .expect("http client builds");
        HttpGenerator { config, api_key, client }
    }

    fn backoff(&self, retry: u32) -> Duration {
        let base = self.config.backoff_base_ms as f64 * 2f64.powi(retry as i32);
        let jitter = rand::thread_rng().gen_range(0.8..=1.2);
        Duration::from_millis((base * jitter) as u64)
    }

    fn once(&self, body: &str) -> Result<String, GenerationError> {
        let url = self.config.endpoint_url.as_deref().unwrap_or_default();
        let resp = self
            .client
            .post(url)
            .bearer_auth(&self.api_key)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body.to_string())
            .send()
            .map_err(classify)?;
        let status = resp.status();
        if !status.is_success() {
            return Err(GenerationError::BadStatus { code: status.as_u16() });
        }
        let text = resp.text().map_err(classify)?;
        let v: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| GenerationError::MalformedResponse { detail: format!("body is not JSON: {e}") })?;
        v.pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| GenerationError::MalformedResponse { detail: "missing choices[0].message.content".into() })
    }
}

fn classify(e: reqwest::Error) -> GenerationError {
    if e.is_timeout() {
        GenerationError::Timeout
    } else {
        GenerationError::Transport { detail: e.to_string() }
    }
}

impl Generator for HttpGenerator {
    fn generate(&self, prompt: &PromptBundle, _key: &AttemptKey) -> Result<String, GenerationError> {
        let body = chat_payload(prompt, &self.config.model_name, self.config.temperature);
        let mut retry = 0;
        loop {
            match self.once(&body) {
                Err(e) if e.is_transient() && retry < self.config.max_retries => {
                    thread::sleep(self.backoff(retry));
                    retry += 1;
                }
                other => return other,
            }
        }
    }
}
