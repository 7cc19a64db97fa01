//! Completion providers and response parsing.

mod extract;
mod http;
mod replay;

use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use extract::extract_patch;
pub use http::HttpProvider;
pub use replay::{RecordingProvider, ReplayEntry, ReplayProvider, ReplayTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub tokens_in: u64,
    pub tokens_out: u64,
    pub latency_s: f64,
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("provider error: {0}")]
    Provider(String),
    #[error("no replay fixture for prompt digest {0}")]
    FixtureMiss(String),
    #[error("response contains no parseable code block")]
    UnparseableResponse,
    #[error("provider configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ProviderKind {
    HttpApi,
    Replay,
}

/// Provider settings. Credentials are referenced by environment variable
/// name only, so the struct can be logged and persisted safely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    /// Name of the environment variable holding the API key.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub fixture_path: Option<PathBuf>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_output_tokens")]
    pub max_output_tokens: u32,
    #[serde(default = "default_timeout")]
    pub request_timeout_s: u64,
    /// JSON pointer to the completion text in the response body.
    #[serde(default = "default_text_pointer")]
    pub text_pointer: String,
    #[serde(default = "default_tokens_in_pointer")]
    pub tokens_in_pointer: String,
    #[serde(default = "default_tokens_out_pointer")]
    pub tokens_out_pointer: String,
}

fn default_max_output_tokens() -> u32 {
    4096
}
fn default_timeout() -> u64 {
    120
}
fn default_text_pointer() -> String {
    "/choices/0/message/content".into()
}
fn default_tokens_in_pointer() -> String {
    "/usage/prompt_tokens".into()
}
fn default_tokens_out_pointer() -> String {
    "/usage/completion_tokens".into()
}

impl ProviderConfig {
    pub fn http(endpoint: &str, model: &str, api_key_env: Option<&str>) -> Self {
        ProviderConfig {
            kind: ProviderKind::HttpApi,
            endpoint: Some(endpoint.to_string()),
            model: Some(model.to_string()),
            api_key_env: api_key_env.map(str::to_string),
            fixture_path: None,
            temperature: 0.0,
            max_output_tokens: default_max_output_tokens(),
            request_timeout_s: default_timeout(),
            text_pointer: default_text_pointer(),
            tokens_in_pointer: default_tokens_in_pointer(),
            tokens_out_pointer: default_tokens_out_pointer(),
        }
    }

    pub fn replay(fixture_path: impl Into<PathBuf>) -> Self {
        ProviderConfig {
            kind: ProviderKind::Replay,
            endpoint: None,
            model: None,
            api_key_env: None,
            fixture_path: Some(fixture_path.into()),
            ..ProviderConfig::http("", "", None)
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        match self.kind {
            ProviderKind::Replay if self.fixture_path.is_none() => {
                Err(LlmError::Config("REPLAY requires a fixture path".into()))
            }
            ProviderKind::HttpApi if self.endpoint.as_deref().is_none_or(str::is_empty) => {
                Err(LlmError::Config("HTTP_API requires an endpoint".into()))
            }
            _ if !(self.temperature >= 0.0) => Err(LlmError::Config("temperature must be nonnegative".into())),
            _ => Ok(()),
        }
    }

    /// Builds the configured provider.
    pub fn build(&self) -> Result<Box<dyn Provider>, LlmError> {
        self.validate()?;
        Ok(match self.kind {
            ProviderKind::HttpApi => Box::new(HttpProvider::new(self.clone())?),
            ProviderKind::Replay => Box::new(ReplayProvider::load(self.fixture_path.as_ref().expect("validated"))?),
        })
    }
}

/// A single-turn completion source.
pub trait Provider: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<Completion, LlmError>;
}

/// Stable digest of the exact prompt text: `sha256:<lowercase hex>` of its
/// UTF-8 bytes.
pub fn prompt_digest(prompt: &str) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(prompt.as_bytes())))
}

/// Rough token estimate (four characters per token) for providers that do
/// not report usage.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

/// Returns canned responses in order, repeating the last one once the list
/// is exhausted. Counts calls.
#[derive(Debug)]
pub struct SequenceProvider {
    responses: Vec<String>,
    calls: Mutex<usize>,
}

impl SequenceProvider {
    pub fn new(responses: Vec<String>) -> Self {
        assert!(!responses.is_empty(), "at least one response");
        SequenceProvider {
            responses,
            calls: Mutex::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        *self.calls.lock().expect("poisoned")
    }
}

impl Provider for SequenceProvider {
    fn complete(&self, prompt: &str) -> Result<Completion, LlmError> {
        let started = Instant::now();
        let mut calls = self.calls.lock().expect("poisoned");
        let text = self.responses[(*calls).min(self.responses.len() - 1)].clone();
        *calls += 1;
        Ok(Completion {
            tokens_in: estimate_tokens(prompt),
            tokens_out: estimate_tokens(&text),
            text,
            latency_s: started.elapsed().as_secs_f64(),
        })
    }
}

/// Picks the response of the first rule whose every needle occurs in the
/// prompt. Useful to stand in for a model while recording fixtures.
#[derive(Debug, Clone, Default)]
pub struct RuleProvider {
    rules: Vec<(Vec<String>, String)>,
}

impl RuleProvider {
    pub fn new() -> Self {
        RuleProvider::default()
    }

    pub fn rule(mut self, needles: &[&str], response: &str) -> Self {
        self.rules
            .push((needles.iter().map(|s| s.to_string()).collect(), response.to_string()));
        self
    }
}

impl Provider for RuleProvider {
    fn complete(&self, prompt: &str) -> Result<Completion, LlmError> {
        let text = self
            .rules
            .iter()
            .find(|(needles, _)| needles.iter().all(|n| prompt.contains(n.as_str())))
            .map(|(_, r)| r.clone())
            .ok_or_else(|| LlmError::Provider("no rule matches the prompt".into()))?;
        Ok(Completion {
            tokens_in: estimate_tokens(prompt),
            tokens_out: estimate_tokens(&text),
            text,
            latency_s: 0.0,
        })
    }
}

impl<P: Provider + ?Sized> Provider for Box<P> {
    fn complete(&self, prompt: &str) -> Result<Completion, LlmError> {
        (**self).complete(prompt)
    }
}

impl<P: Provider + ?Sized> Provider for std::sync::Arc<P> {
    fn complete(&self, prompt: &str) -> Result<Completion, LlmError> {
        (**self).complete(prompt)
    }
}
