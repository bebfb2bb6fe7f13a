//! Language-model providers.
//!
//! [`HttpProvider`] talks to an OpenAI-compatible chat-completions endpoint;
//! [`MockProvider`] answers deterministically for tests and offline runs.

use serde::Deserialize;
use serde_json::{json, Value};
use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProviderError {
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    #[error("provider configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompletionRequest<'a> {
    pub model_id: &'a str,
    pub prompt: &'a str,
    pub temperature: f64,
    pub top_p: f64,
}

pub trait Provider: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError>;
}

pub const DEFAULT_API_KEY_ENV: &str = "COMMVAL_API_KEY";

pub struct HttpProvider {
    endpoint: String,
    api_key: String,
    agent: ureq::Agent,
}

impl HttpProvider {
    /// Reads the bearer token from the environment variable `api_key_env`.
    pub fn from_env(endpoint: &str, api_key_env: &str) -> Result<Self, ProviderError> {
        let api_key = std::env::var(api_key_env)
            .map_err(|_| ProviderError::Config(format!("environment variable {api_key_env} is not set")))?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .into();
        Ok(Self {
            endpoint: endpoint.to_string(),
            api_key,
            agent,
        })
    }
}

impl Provider for HttpProvider {
    fn name(&self) -> &str {
        "http"
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError> {
        let body = json!({
            "model": request.model_id,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "top_p": request.top_p,
        });
        let mut response = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body)
            .map_err(|e| ProviderError::Unavailable(e.to_string()))?;
        let value: Value = response
            .body_mut()
            .read_json()
            .map_err(|e| ProviderError::Unavailable(e.to_string()))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| ProviderError::Unavailable("response has no message content".into()))
    }
}

type Responder = dyn Fn(&str, usize) -> Result<String, ProviderError> + Send + Sync;

/// Deterministic provider driven by a responder function.
///
/// The responder receives the prompt and the number of earlier calls made
/// with the identical prompt, so retries can be scripted.
pub struct MockProvider {
    responder: Box<Responder>,
    attempts: Mutex<HashMap<String, usize>>,
    calls: AtomicUsize,
}

impl MockProvider {
    pub fn from_fn(
        responder: impl Fn(&str, usize) -> Result<String, ProviderError> + Send + Sync + 'static,
    ) -> Self {
        Self {
            responder: Box::new(responder),
            attempts: Mutex::new(HashMap::new()),
            calls: AtomicUsize::new(0),
        }
    }

    /// Returns the given responses in order, then reports itself unavailable.
    pub fn scripted(responses: Vec<String>) -> Self {
        let next = AtomicUsize::new(0);
        Self::from_fn(move |_, _| {
            let i = next.fetch_add(1, Ordering::SeqCst);
            responses
                .get(i)
                .cloned()
                .ok_or_else(|| ProviderError::Unavailable("script exhausted".into()))
        })
    }

    pub fn from_script(script: MockScript) -> Self {
        Self::from_fn(move |prompt, attempt| Ok(script.respond(prompt, attempt)))
    }

    /// Total number of `complete` calls.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Provider for MockProvider {
    fn name(&self) -> &str {
        "mock"
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let attempt = {
            let mut attempts = self.attempts.lock().expect("mock attempts poisoned");
            let n = attempts.entry(request.prompt.to_string()).or_insert(0);
            *n += 1;
            *n - 1
        };
        (self.responder)(request.prompt, attempt)
    }
}

/// One rule of a mock script: the first rule whose `contains` text occurs in the
/// prompt answers it. During the first `fail_attempts` calls for a prompt the
/// rule answers with malformed text instead.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockRule {
    pub contains: String,
    pub response: String,
    #[serde(default)]
    pub fail_attempts: usize,
}

pub const MOCK_MALFORMED: &str = "this is not json";
const MOCK_DEFAULT: &str = r#"{"thinking":"no scripted rule matched","answer":"N/A"}"#;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MockScript {
    pub rules: Vec<MockRule>,
    pub default_response: Option<String>,
}

impl MockScript {
    /// Script file: one JSON rule per line; blank lines and `#` comments ignored.
    pub fn read(path: &Path) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ProviderError> {
        let rules = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
            .map(|(i, l)| {
                serde_json::from_str(l)
                    .map_err(|e| ProviderError::Config(format!("mock script line {}: {e}", i + 1)))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            rules,
            default_response: None,
        })
    }

    pub fn respond(&self, prompt: &str, attempt: usize) -> String {
        match self.rules.iter().find(|r| prompt.contains(&r.contains)) {
            Some(rule) if attempt < rule.fail_attempts => MOCK_MALFORMED.to_string(),
            Some(rule) => rule.response.clone(),
            None => self
                .default_response
                .clone()
                .unwrap_or_else(|| MOCK_DEFAULT.to_string()),
        }
    }
}
