//! Completion interface over LLM providers: token budgeting, retries with
//! backoff, bounded concurrency and a record/replay cache.

mod cache;
mod oracle;
mod provider;

use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{cache_key, CompletionRecord, ReplayCache};
pub use oracle::MessageCoverageOracle;
pub use provider::{
    CompletionProvider, FailingProvider, FnProvider, HttpCompletionProvider, ProviderError, ProviderRequest,
    ScriptRule, ScriptedProvider,
};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("prompt needs ~{estimated} tokens plus {max_output} output tokens, over the {limit}-token context limit")]
    TokenBudget { estimated: usize, max_output: usize, limit: usize },
    #[error("provider failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("provider rejected the request: {0}")]
    Rejected(String),
    #[error("replay cache has no record for prompt {0}")]
    ReplayMiss(String),
    #[error("provider returned an empty response")]
    EmptyResponse,
    #[error("invalid provider config: {0}")]
    InvalidConfig(String),
    #[error("replay cache: {0}")]
    Cache(String),
}

impl GatewayError {
    /// Whether a caller may reasonably retry the same request later.
    pub fn is_retriable(&self) -> bool {
        matches!(self, GatewayError::Transport { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Live,
    Record,
    Replay,
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "live" => Ok(Mode::Live),
            "record" => Ok(Mode::Record),
            "replay" => Ok(Mode::Replay),
            _ => Err(format!("unknown mode `{s}` (live, record, replay)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub provider_id: String,
    pub endpoint: String,
    pub model_name: String,
    pub temperature: f64,
    pub max_output_tokens: usize,
    pub context_limit_tokens: usize,
    pub max_retries: u32,
    pub request_timeout_ms: u64,
    pub backoff_base_ms: u64,
    pub backoff_cap_ms: u64,
    pub max_in_flight: usize,
    /// Name of the environment variable holding the API key.
    pub api_key_env: Option<String>,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            provider_id: "mock".into(),
            endpoint: String::new(),
            model_name: "mock".into(),
            temperature: 0.0,
            max_output_tokens: 512,
            context_limit_tokens: 128_000,
            max_retries: 3,
            request_timeout_ms: 60_000,
            backoff_base_ms: 500,
            backoff_cap_ms: 8_000,
            max_in_flight: 4,
            api_key_env: None,
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(self.temperature >= 0.0) || !self.temperature.is_finite() {
            return Err(GatewayError::InvalidConfig("temperature must be a finite value >= 0".into()));
        }
        if self.context_limit_tokens == 0 {
            return Err(GatewayError::InvalidConfig("context_limit_tokens must be > 0".into()));
        }
        if self.max_in_flight == 0 {
            return Err(GatewayError::InvalidConfig("max_in_flight must be > 0".into()));
        }
        Ok(())
    }

    pub fn request_timeout(&self) -> Duration {
        Duration::from_millis(self.request_timeout_ms)
    }

    /// Delay before retry `attempt` (0-based): `base * 2^attempt`, capped.
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u64.checked_shl(attempt).unwrap_or(u64::MAX);
        Duration::from_millis(self.backoff_base_ms.saturating_mul(factor).min(self.backoff_cap_ms))
    }
}

/// Conservative token estimate: one token per three characters, rounded up.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(3)
}

/// Counting semaphore for in-flight provider calls.
struct Limiter {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn new(n: usize) -> Self {
        Self { free: Mutex::new(n), cv: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;

/// Counters for observing gateway behaviour.
#[derive(Debug, Default)]
pub struct GatewayStats {
    pub provider_calls: AtomicU64,
    pub retries: AtomicU64,
    pub cache_hits: AtomicU64,
}

pub struct Gateway {
    provider: Arc<dyn CompletionProvider>,
    config: ProviderConfig,
    mode: Mode,
    cache: Option<Arc<ReplayCache>>,
    limiter: Limiter,
    sleeper: Sleeper,
    stats: GatewayStats,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("provider", &self.provider.id())
            .field("mode", &self.mode)
            .field("config", &self.config)
            .finish()
    }
}

impl Gateway {
    pub fn new(provider: Arc<dyn CompletionProvider>, config: ProviderConfig) -> Result<Self, GatewayError> {
        config.validate()?;
        Ok(Self {
            provider,
            limiter: Limiter::new(config.max_in_flight),
            config,
            mode: Mode::Live,
            cache: None,
            sleeper: Arc::new(std::thread::sleep),
            stats: GatewayStats::default(),
        })
    }

    /// Record and Replay need a cache; Live ignores it.
    pub fn with_mode(mut self, mode: Mode, cache: Option<Arc<ReplayCache>>) -> Result<Self, GatewayError> {
        if mode != Mode::Live && cache.is_none() {
            return Err(GatewayError::InvalidConfig(format!("{mode:?} mode needs a replay cache")));
        }
        self.mode = mode;
        self.cache = cache;
        Ok(self)
    }

    /// Replaces the backoff sleep, e.g. to observe delays in tests.
    pub fn with_sleeper(mut self, sleeper: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleeper = Arc::new(sleeper);
        self
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn stats(&self) -> &GatewayStats {
        &self.stats
    }

    pub fn complete(&self, prompt: &str) -> Result<String, GatewayError> {
        self.complete_with(prompt, None, 0)
    }

    /// `temperature` overrides the configured one; `sample` distinguishes
    /// repeated runs of the same prompt in the cache.
    pub fn complete_with(&self, prompt: &str, temperature: Option<f64>, sample: u32) -> Result<String, GatewayError> {
        let estimated = estimate_tokens(prompt);
        if estimated + self.config.max_output_tokens > self.config.context_limit_tokens {
            return Err(GatewayError::TokenBudget {
                estimated,
                max_output: self.config.max_output_tokens,
                limit: self.config.context_limit_tokens,
            });
        }
        let temperature = temperature.unwrap_or(self.config.temperature);
        let key = cache_key(&self.config.provider_id, &self.config.model_name, temperature, sample, prompt);

        if self.mode == Mode::Replay {
            let cache = self.cache.as_ref().expect("replay mode has a cache");
            let hit = cache.get(&key).ok_or_else(|| GatewayError::ReplayMiss(key.clone()))?;
            self.stats.cache_hits.fetch_add(1, Ordering::Relaxed);
            return Ok(hit.response_text);
        }

        let request = ProviderRequest {
            prompt,
            model: &self.config.model_name,
            temperature,
            max_output_tokens: self.config.max_output_tokens,
            sample,
        };
        let started = Instant::now();
        let response = self.call_with_retries(&request)?;
        if response.is_empty() {
            return Err(GatewayError::EmptyResponse);
        }
        if self.mode == Mode::Record {
            let record = CompletionRecord {
                prompt_hash: key,
                prompt_text: prompt.to_string(),
                response_text: response.clone(),
                provider_id: self.config.provider_id.clone(),
                model_name: self.config.model_name.clone(),
                temperature,
                sample,
                timestamp: chrono::Utc::now().to_rfc3339(),
                latency_ms: started.elapsed().as_millis() as u64,
            };
            self.cache.as_ref().expect("record mode has a cache").append(record)?;
        }
        Ok(response)
    }

    fn call_with_retries(&self, request: &ProviderRequest<'_>) -> Result<String, GatewayError> {
        let _permit = self.limiter.acquire();
        let mut attempt = 0u32;
        loop {
            self.stats.provider_calls.fetch_add(1, Ordering::Relaxed);
            match self.provider.complete(request) {
                Ok(text) => return Ok(text),
                Err(ProviderError::Permanent(msg)) => return Err(GatewayError::Rejected(msg)),
                Err(ProviderError::Transient(msg)) => {
                    if attempt >= self.config.max_retries {
                        return Err(GatewayError::Transport { attempts: attempt + 1, message: msg });
                    }
                    (self.sleeper)(self.config.backoff(attempt));
                    self.stats.retries.fetch_add(1, Ordering::Relaxed);
                    attempt += 1;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_estimate() {
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens(&"a".repeat(300)), 100);
        assert_eq!(estimate_tokens("abcd"), 2);
    }

    #[test]
    fn backoff_is_capped_and_non_decreasing() {
        let c = ProviderConfig { backoff_base_ms: 100, backoff_cap_ms: 1000, ..Default::default() };
        let d: Vec<u64> = (0..70).map(|i| c.backoff(i).as_millis() as u64).collect();
        assert_eq!(&d[..5], &[100, 200, 400, 800, 1000]);
        assert!(d.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn scripted_answer() {
        let p = ScriptedProvider::new(vec![ScriptRule::new("MESSAGE_1", "Yes")], "No");
        let g = Gateway::new(Arc::new(p), ProviderConfig::default()).unwrap();
        assert_eq!(g.complete("does MESSAGE_1 appear").unwrap(), "Yes");
        assert_eq!(g.complete("other").unwrap(), "No");
    }

    #[test]
    fn budget_checked_before_any_call() {
        let failing = Arc::new(FailingProvider::transient());
        let cfg = ProviderConfig { context_limit_tokens: 8192, max_output_tokens: 0, ..Default::default() };
        let g = Gateway::new(failing.clone(), cfg).unwrap();
        let err = g.complete(&"x".repeat(27_000)).unwrap_err();
        assert!(matches!(err, GatewayError::TokenBudget { estimated: 9000, limit: 8192, .. }));
        assert_eq!(failing.calls(), 0);
    }

    #[test]
    fn retries_bounded_with_growing_delays() {
        let failing = Arc::new(FailingProvider::transient());
        let delays = Arc::new(Mutex::new(Vec::new()));
        let seen = delays.clone();
        let cfg = ProviderConfig { max_retries: 3, backoff_base_ms: 10, backoff_cap_ms: 25, ..Default::default() };
        let g = Gateway::new(failing.clone(), cfg)
            .unwrap()
            .with_sleeper(move |d| seen.lock().unwrap().push(d.as_millis() as u64));
        let err = g.complete("hi").unwrap_err();
        assert!(matches!(err, GatewayError::Transport { attempts: 4, .. }));
        assert!(err.is_retriable());
        assert_eq!(failing.calls(), 4);
        assert_eq!(*delays.lock().unwrap(), vec![10, 20, 25]);
    }

    #[test]
    fn permanent_errors_are_not_retried() {
        let failing = Arc::new(FailingProvider::permanent());
        let g = Gateway::new(failing.clone(), ProviderConfig::default()).unwrap();
        assert!(matches!(g.complete("hi"), Err(GatewayError::Rejected(_))));
        assert_eq!(failing.calls(), 1);
    }

    #[test]
    fn flaky_provider_recovers() {
        let calls = AtomicU64::new(0);
        let p = FnProvider::new("flaky", move |_r: &ProviderRequest<'_>| {
            if calls.fetch_add(1, Ordering::SeqCst) < 2 {
                Err(ProviderError::Transient("503".into()))
            } else {
                Ok("Yes".into())
            }
        });
        let g = Gateway::new(Arc::new(p), ProviderConfig::default()).unwrap().with_sleeper(|_| {});
        assert_eq!(g.complete("q").unwrap(), "Yes");
        assert_eq!(g.stats().retries.load(Ordering::Relaxed), 2);
    }

    #[test]
    fn concurrency_limit_holds() {
        use std::sync::atomic::AtomicUsize;
        let now = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        let (n, p) = (now.clone(), peak.clone());
        let provider = FnProvider::new("slow", move |_r: &ProviderRequest<'_>| {
            let cur = n.fetch_add(1, Ordering::SeqCst) + 1;
            p.fetch_max(cur, Ordering::SeqCst);
            std::thread::sleep(Duration::from_millis(5));
            n.fetch_sub(1, Ordering::SeqCst);
            Ok("No".into())
        });
        let cfg = ProviderConfig { max_in_flight: 2, ..Default::default() };
        let g = Arc::new(Gateway::new(Arc::new(provider), cfg).unwrap());
        std::thread::scope(|s| {
            for i in 0..12 {
                let g = g.clone();
                s.spawn(move || g.complete(&format!("p{i}")).unwrap());
            }
        });
        assert!(peak.load(Ordering::SeqCst) <= 2);
        assert!(peak.load(Ordering::SeqCst) >= 1);
    }

    #[test]
    fn record_then_replay_without_provider() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let p = ScriptedProvider::new(vec![], "The response is: Yes.\n  trailing  ");
        let cache = Arc::new(ReplayCache::open(&path).unwrap());
        let rec = Gateway::new(Arc::new(p), ProviderConfig::default())
            .unwrap()
            .with_mode(Mode::Record, Some(cache))
            .unwrap();
        let recorded = rec.complete("prompt A").unwrap();

        let failing = Arc::new(FailingProvider::transient());
        let cache = Arc::new(ReplayCache::open(&path).unwrap());
        let rep = Gateway::new(failing.clone(), ProviderConfig::default())
            .unwrap()
            .with_mode(Mode::Replay, Some(cache))
            .unwrap();
        assert_eq!(rep.complete("prompt A").unwrap(), recorded);
        assert!(matches!(rep.complete("prompt B"), Err(GatewayError::ReplayMiss(_))));
        // a different temperature is a different record
        assert!(matches!(rep.complete_with("prompt A", Some(0.7), 0), Err(GatewayError::ReplayMiss(_))));
        assert_eq!(failing.calls(), 0);
    }

    #[test]
    fn replay_requires_cache() {
        let g = Gateway::new(Arc::new(ScriptedProvider::constant("Yes")), ProviderConfig::default()).unwrap();
        assert!(g.with_mode(Mode::Replay, None).is_err());
    }

    #[test]
    fn config_validation() {
        let bad = ProviderConfig { temperature: -0.1, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = ProviderConfig { context_limit_tokens: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
