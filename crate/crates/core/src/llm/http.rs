use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::{estimate_tokens, Completion, LlmError, Provider, ProviderConfig};

/// OpenAI-style chat-completion client. The request carries one user
/// message; the reply text and usage are read through configurable JSON
/// pointers.
pub struct HttpProvider {
    config: ProviderConfig,
    agent: ureq::Agent,
    api_key: Option<String>,
}

impl std::fmt::Debug for HttpProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpProvider")
            .field("endpoint", &self.config.endpoint)
            .field("model", &self.config.model)
            .finish_non_exhaustive()
    }
}

impl HttpProvider {
    pub fn new(config: ProviderConfig) -> Result<Self, LlmError> {
        let api_key = match &config.api_key_env {
            Some(var) => Some(
                std::env::var(var)
                    .map_err(|_| LlmError::Config(format!("environment variable {var} is not set")))?,
            ),
            None => None,
        };
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(config.request_timeout_s))
            .build();
        Ok(HttpProvider { config, agent, api_key })
    }

    fn request_body(&self, prompt: &str) -> Value {
        json!({
            "model": self.config.model.clone().unwrap_or_default(),
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_output_tokens,
        })
    }

    fn attempt(&self, prompt: &str) -> Result<Completion, LlmError> {
        let endpoint = self.config.endpoint.as_deref().unwrap_or_default();
        let started = Instant::now();
        let mut req = self.agent.post(endpoint).set("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        let response = req.send_json(self.request_body(prompt)).map_err(|e| match e {
            ureq::Error::Status(code, _) => LlmError::Provider(format!("HTTP status {code}")),
            ureq::Error::Transport(t) => LlmError::Provider(format!("transport: {}", t.kind())),
        })?;
        let body: Value = response
            .into_json()
            .map_err(|e| LlmError::Provider(format!("invalid response body: {e}")))?;
        let text = body
            .pointer(&self.config.text_pointer)
            .and_then(Value::as_str)
            .ok_or_else(|| LlmError::Provider(format!("response has no text at {}", self.config.text_pointer)))?
            .to_string();
        let count = |ptr: &str| body.pointer(ptr).and_then(Value::as_u64);
        Ok(Completion {
            tokens_in: count(&self.config.tokens_in_pointer).unwrap_or_else(|| estimate_tokens(prompt)),
            tokens_out: count(&self.config.tokens_out_pointer).unwrap_or_else(|| estimate_tokens(&text)),
            text,
            latency_s: started.elapsed().as_secs_f64(),
        })
    }
}

impl Provider for HttpProvider {
    /// One retry on failure.
    fn complete(&self, prompt: &str) -> Result<Completion, LlmError> {
        self.attempt(prompt).or_else(|first| {
            log::warn!("completion failed ({first}); retrying once");
            self.attempt(prompt)
        })
    }
}
