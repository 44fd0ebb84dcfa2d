//! TOML configuration and construction of providers, embedders and the
//! validator from it. Secrets are read from environment variables named in
//! the config, never from the file itself.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::InterfaceError;
use crate::corpus::MessageExtractor;
use crate::gateway::{
    CompletionProvider, Gateway, HttpCompletionProvider, MessageCoverageOracle, Mode, ProviderConfig, ReplayCache,
    ScriptRule, ScriptedProvider,
};
use crate::prompting::StrategyConfig;
use crate::retrieval::{CachedEmbedder, Embedder, HttpEmbedder, LexicalEmbedder, Metric, PrecomputedEmbedder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    /// The message-coverage mock.
    #[default]
    Oracle,
    Scripted,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderSection {
    pub kind: ProviderKind,
    #[serde(flatten)]
    pub settings: ProviderConfig,
    pub rules: Vec<ScriptRule>,
    pub default_response: String,
}

impl Default for ProviderSection {
    fn default() -> Self {
        Self { kind: ProviderKind::Oracle, settings: ProviderConfig::default(), rules: Vec::new(), default_response: "No".into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    #[default]
    Lexical,
    Http,
    Precomputed,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedderSection {
    pub kind: EmbedderKind,
    pub endpoint: String,
    pub model: String,
    pub dimension: usize,
    pub api_key_env: Option<String>,
    /// JSONL of `{text, vector}` for the precomputed embedder.
    pub vectors_path: Option<PathBuf>,
    /// Persistent embedding cache.
    pub cache_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServerSection {
    pub bind: String,
    /// Environment variable holding the bearer token. No token, no auth.
    pub auth_token_env: Option<String>,
}

impl Default for ServerSection {
    fn default() -> Self {
        Self { bind: "127.0.0.1:8080".into(), auth_token_env: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AppConfig {
    pub provider: ProviderSection,
    pub embedder: EmbedderSection,
    pub strategy: StrategyConfig,
    pub metric: Metric,
    pub mode: Mode,
    pub replay_cache_path: Option<PathBuf>,
    pub stopword_file: Option<PathBuf>,
    pub mask_trigger: bool,
    pub corpus_dir: PathBuf,
    pub store_path: PathBuf,
    pub reports_path: PathBuf,
    /// Maximum concurrent provider calls.
    pub concurrency_limit: usize,
    pub server: ServerSection,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            provider: ProviderSection::default(),
            embedder: EmbedderSection::default(),
            strategy: StrategyConfig::default(),
            metric: Metric::Cosine,
            mode: Mode::Live,
            replay_cache_path: None,
            stopword_file: None,
            mask_trigger: true,
            corpus_dir: "corpus".into(),
            store_path: "store.jsonl".into(),
            reports_path: "reports.jsonl".into(),
            concurrency_limit: 4,
            server: ServerSection::default(),
        }
    }
}

impl AppConfig {
    pub fn from_toml(text: &str) -> Result<Self, InterfaceError> {
        toml::from_str(text).map_err(|e| InterfaceError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, InterfaceError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| InterfaceError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn extractor(&self) -> Result<MessageExtractor, InterfaceError> {
        let ex = match &self.stopword_file {
            Some(p) => MessageExtractor::from_stopword_file(p)
                .map_err(|e| InterfaceError::Config(format!("stopword file {}: {e}", p.display())))?,
            None => MessageExtractor::default(),
        };
        Ok(ex.mask_trigger(self.mask_trigger))
    }

    pub fn build_provider(&self) -> Arc<dyn CompletionProvider> {
        let p = &self.provider;
        match p.kind {
            ProviderKind::Oracle => Arc::new(MessageCoverageOracle::default()),
            ProviderKind::Scripted => Arc::new(ScriptedProvider::new(p.rules.clone(), p.default_response.clone())),
            ProviderKind::Http => Arc::new(HttpCompletionProvider::from_env(
                p.settings.provider_id.clone(),
                p.settings.endpoint.clone(),
                p.settings.api_key_env.as_deref(),
                p.settings.request_timeout(),
            )),
        }
    }

    pub fn build_gateway(&self) -> Result<Gateway, InterfaceError> {
        self.build_gateway_with(self.build_provider())
    }

    pub fn build_gateway_with(&self, provider: Arc<dyn CompletionProvider>) -> Result<Gateway, InterfaceError> {
        let mut settings = self.provider.settings.clone();
        settings.max_in_flight = self.concurrency_limit;
        let gateway = Gateway::new(provider, settings)?;
        let cache = match (&self.replay_cache_path, self.mode) {
            (_, Mode::Live) => None,
            (Some(p), _) => Some(Arc::new(ReplayCache::open(p)?)),
            (None, m) => return Err(InterfaceError::Config(format!("{m:?} mode needs replay_cache_path"))),
        };
        Ok(gateway.with_mode(self.mode, cache)?)
    }

    pub fn build_embedder(&self) -> Result<Arc<dyn Embedder>, InterfaceError> {
        let e = &self.embedder;
        let cfg = |m: &str| InterfaceError::Config(m.to_string());
        let inner: Arc<dyn Embedder> = match e.kind {
            EmbedderKind::Lexical => Arc::new(LexicalEmbedder::default()),
            EmbedderKind::Http => {
                if e.dimension == 0 {
                    return Err(cfg("embedder.dimension must be set for the http embedder"));
                }
                let key = e.api_key_env.as_deref().and_then(|v| std::env::var(v).ok());
                Arc::new(HttpEmbedder::new("http", &e.endpoint, &e.model, e.dimension, key, Duration::from_secs(60)))
            }
            EmbedderKind::Precomputed => {
                let path = e.vectors_path.as_ref().ok_or_else(|| cfg("embedder.vectors_path is required"))?;
                Arc::new(PrecomputedEmbedder::from_jsonl("precomputed", path)?)
            }
        };
        Ok(match &e.cache_path {
            Some(p) => Arc::new(CachedEmbedder::with_file(inner, p)?),
            None => inner,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_config() {
        let cfg = AppConfig::from_toml(
            r#"
            metric = "euclidean"
            mode = "replay"
            replay_cache_path = "cache.jsonl"
            store_path = "data/store.jsonl"
            concurrency_limit = 2

            [provider]
            kind = "scripted"
            default_response = "No"
            temperature = 0.0
            context_limit_tokens = 8192
            rules = [{ pattern = "MESSAGE_1", response = "Yes" }]

            [strategy]
            kind = "RAG"
            k = 5

            [server]
            bind = "0.0.0.0:9000"
            auth_token_env = "TRACELINK_TOKEN"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.metric, Metric::Euclidean);
        assert_eq!(cfg.mode, Mode::Replay);
        assert_eq!(cfg.provider.kind, ProviderKind::Scripted);
        assert_eq!(cfg.provider.settings.context_limit_tokens, 8192);
        assert_eq!(cfg.provider.rules.len(), 1);
        assert_eq!(cfg.strategy.k, 5);
        assert_eq!(cfg.server.bind, "0.0.0.0:9000");
    }

    #[test]
    fn unknown_keys_and_missing_cache_fail() {
        assert!(AppConfig::from_toml("metric = \"manhattan\"").is_err());
        let cfg = AppConfig { mode: Mode::Record, ..Default::default() };
        assert!(cfg.build_gateway().is_err());
    }

    #[test]
    fn defaults_build() {
        let cfg = AppConfig::default();
        cfg.build_gateway().unwrap();
        assert_eq!(cfg.build_embedder().unwrap().provider_id(), "lexical");
    }
}
