use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

/// What a provider sees for one call.
#[derive(Debug, Clone, Copy)]
pub struct ProviderRequest<'a> {
    pub prompt: &'a str,
    pub model: &'a str,
    pub temperature: f64,
    pub max_output_tokens: usize,
    /// Run index for repeated sampling of the same prompt.
    pub sample: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderError {
    /// Worth retrying: timeouts, connection errors, 429, 5xx.
    Transient(String),
    Permanent(String),
}

pub trait CompletionProvider: Send + Sync {
    fn id(&self) -> &str;
    fn complete(&self, request: &ProviderRequest<'_>) -> Result<String, ProviderError>;
}

/// One mock rule: any prompt containing `pattern` gets `response`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptRule {
    pub pattern: String,
    pub response: String,
}

impl ScriptRule {
    pub fn new(pattern: impl Into<String>, response: impl Into<String>) -> Self {
        Self { pattern: pattern.into(), response: response.into() }
    }
}

/// Ordered substring rules with a default response. First match wins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedProvider {
    pub rules: Vec<ScriptRule>,
    pub default_response: String,
}

impl ScriptedProvider {
    pub fn new(rules: Vec<ScriptRule>, default_response: impl Into<String>) -> Self {
        Self { rules, default_response: default_response.into() }
    }

    pub fn constant(response: impl Into<String>) -> Self {
        Self::new(Vec::new(), response)
    }

    pub fn respond(&self, prompt: &str) -> &str {
        self.rules
            .iter()
            .find(|r| prompt.contains(&r.pattern))
            .map_or(self.default_response.as_str(), |r| r.response.as_str())
    }
}

impl CompletionProvider for ScriptedProvider {
    fn id(&self) -> &str {
        "scripted"
    }

    fn complete(&self, request: &ProviderRequest<'_>) -> Result<String, ProviderError> {
        Ok(self.respond(request.prompt).to_string())
    }
}

/// Provider backed by a closure.
pub struct FnProvider<F> {
    id: String,
    f: F,
}

impl<F> FnProvider<F>
where
    F: Fn(&ProviderRequest<'_>) -> Result<String, ProviderError> + Send + Sync,
{
    pub fn new(id: impl Into<String>, f: F) -> Self {
        Self { id: id.into(), f }
    }
}

impl<F> CompletionProvider for FnProvider<F>
where
    F: Fn(&ProviderRequest<'_>) -> Result<String, ProviderError> + Send + Sync,
{
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &ProviderRequest<'_>) -> Result<String, ProviderError> {
        (self.f)(request)
    }
}

/// Always fails and counts how often it was asked. Stands in for a dead
/// transport when asserting that no call happens.
#[derive(Debug)]
pub struct FailingProvider {
    error: ProviderError,
    calls: AtomicU64,
}

impl FailingProvider {
    pub fn transient() -> Self {
        Self { error: ProviderError::Transient("connection refused".into()), calls: AtomicU64::new(0) }
    }

    pub fn permanent() -> Self {
        Self { error: ProviderError::Permanent("400 bad request".into()), calls: AtomicU64::new(0) }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl CompletionProvider for FailingProvider {
    fn id(&self) -> &str {
        "failing"
    }

    fn complete(&self, _request: &ProviderRequest<'_>) -> Result<String, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Err(self.error.clone())
    }
}

/// JSON-over-HTTP completion endpoint.
///
/// Sends `{"model", "prompt", "messages", "temperature", "max_tokens"}` and
/// reads the first of `text`, `completion`, `choices[0].message.content`,
/// `choices[0].text`, `content[0].text`.
pub struct HttpCompletionProvider {
    id: String,
    endpoint: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpCompletionProvider {
    pub fn new(id: impl Into<String>, endpoint: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        Self { id: id.into(), endpoint: endpoint.into(), api_key, agent }
    }

    /// Reads the key from the named environment variable, if any.
    pub fn from_env(id: impl Into<String>, endpoint: impl Into<String>, key_var: Option<&str>, timeout: Duration) -> Self {
        let key = key_var.and_then(|v| std::env::var(v).ok());
        Self::new(id, endpoint, key, timeout)
    }

    pub fn extract_text(body: &serde_json::Value) -> Option<String> {
        let paths: [&[&str]; 5] = [
            &["text"],
            &["completion"],
            &["choices", "0", "message", "content"],
            &["choices", "0", "text"],
            &["content", "0", "text"],
        ];
        paths.iter().find_map(|path| {
            let mut v = body;
            for p in *path {
                v = match p.parse::<usize>() {
                    Ok(i) => v.get(i)?,
                    Err(_) => v.get(*p)?,
                };
            }
            v.as_str().map(str::to_string)
        })
    }
}

impl CompletionProvider for HttpCompletionProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &ProviderRequest<'_>) -> Result<String, ProviderError> {
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let payload = serde_json::json!({
            "model": request.model,
            "prompt": request.prompt,
            "messages": [{ "role": "user", "content": request.prompt }],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        });
        let mut resp = req.send_json(payload).map_err(|e| match e {
            ureq::Error::StatusCode(code) if code == 429 || code >= 500 => {
                ProviderError::Transient(format!("HTTP {code}"))
            }
            ureq::Error::StatusCode(code) => ProviderError::Permanent(format!("HTTP {code}")),
            other => ProviderError::Transient(other.to_string()),
        })?;
        let body: serde_json::Value =
            resp.body_mut().read_json().map_err(|e| ProviderError::Permanent(format!("unreadable body: {e}")))?;
        Self::extract_text(&body).ok_or_else(|| ProviderError::Permanent("no completion text in response".into()))
    }
}
