//! Embedding providers and the content-hash embedding cache.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{EmbeddingVector, RetrievalError};

/// Something that turns text into a fixed-dimension vector.
pub trait Embedder: Send + Sync {
    fn provider_id(&self) -> &str;
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Result<EmbeddingVector, RetrievalError>;
}

impl<E: Embedder + ?Sized> Embedder for std::sync::Arc<E> {
    fn provider_id(&self) -> &str {
        (**self).provider_id()
    }
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn embed(&self, text: &str) -> Result<EmbeddingVector, RetrievalError> {
        (**self).embed(text)
    }
}

pub fn content_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub const LEXICAL_DIMENSION: usize = 512;

/// Hashed bag-of-tokens embedder: lower-cased identifier tokens are hashed
/// into buckets, counted, then L2-normalized. Needs no network and is
/// stable across runs and platforms.
#[derive(Debug, Clone)]
pub struct LexicalEmbedder {
    dimension: usize,
}

impl Default for LexicalEmbedder {
    fn default() -> Self {
        Self { dimension: LEXICAL_DIMENSION }
    }
}

impl LexicalEmbedder {
    pub fn with_dimension(dimension: usize) -> Self {
        assert!(dimension > 0, "dimension must be positive");
        Self { dimension }
    }

    pub fn bucket(&self, token: &str) -> usize {
        let digest = Sha256::digest(token.as_bytes());
        let mut head = [0u8; 8];
        head.copy_from_slice(&digest[..8]);
        (u64::from_le_bytes(head) % self.dimension as u64) as usize
    }

    fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
        text.split(|c: char| !(c.is_alphanumeric() || c == '_'))
            .filter(|t| !t.is_empty())
            .map(str::to_lowercase)
    }

    /// Token counts per bucket, before normalization.
    pub fn raw_counts(&self, text: &str) -> Vec<f64> {
        let mut counts = vec![0.0; self.dimension];
        for t in Self::tokens(text) {
            counts[self.bucket(&t)] += 1.0;
        }
        counts
    }
}

impl Embedder for LexicalEmbedder {
    fn provider_id(&self) -> &str {
        "lexical"
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, RetrievalError> {
        Ok(EmbeddingVector::new(self.raw_counts(text))?.normalized())
    }
}

/// Vectors computed elsewhere (e.g. by a sentence encoder), looked up by
/// exact text.
#[derive(Debug, Clone)]
pub struct PrecomputedEmbedder {
    id: String,
    dimension: usize,
    vectors: HashMap<String, EmbeddingVector>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PrecomputedRecord {
    text: String,
    vector: EmbeddingVector,
}

impl PrecomputedEmbedder {
    pub fn new(id: impl Into<String>, vectors: HashMap<String, EmbeddingVector>) -> Result<Self, RetrievalError> {
        let dimension = vectors.values().next().map_or(0, EmbeddingVector::dimension);
        if let Some(v) = vectors.values().find(|v| v.dimension() != dimension) {
            return Err(RetrievalError::DimensionMismatch { expected: dimension, actual: v.dimension() });
        }
        Ok(Self { id: id.into(), dimension, vectors })
    }

    /// Reads `{text, vector}` lines.
    pub fn from_jsonl(id: impl Into<String>, path: &Path) -> Result<Self, RetrievalError> {
        let mut vectors = HashMap::new();
        for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let r: PrecomputedRecord = serde_json::from_str(&line)
                .map_err(|e| RetrievalError::Cache(format!("{}:{}: {e}", path.display(), i + 1)))?;
            vectors.insert(r.text, r.vector);
        }
        Self::new(id, vectors)
    }
}

impl Embedder for PrecomputedEmbedder {
    fn provider_id(&self) -> &str {
        &self.id
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, RetrievalError> {
        self.vectors
            .get(text)
            .cloned()
            .ok_or_else(|| RetrievalError::Provider(format!("no precomputed vector for text hash {}", content_hash(text))))
    }
}

/// Remote embedding endpoint. Sends `{"model", "input"}` and accepts either
/// `{"embedding": [...]}` or `{"data": [{"embedding": [...]}]}`.
pub struct HttpEmbedder {
    id: String,
    endpoint: String,
    model: String,
    dimension: usize,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpEmbedder {
    pub fn new(
        id: impl Into<String>,
        endpoint: impl Into<String>,
        model: impl Into<String>,
        dimension: usize,
        api_key: Option<String>,
        timeout: Duration,
    ) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        Self { id: id.into(), endpoint: endpoint.into(), model: model.into(), dimension, api_key, agent }
    }
}

impl Embedder for HttpEmbedder {
    fn provider_id(&self) -> &str {
        &self.id
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, RetrievalError> {
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let body: serde_json::Value = req
            .send_json(serde_json::json!({ "model": self.model, "input": text }))
            .map_err(|e| RetrievalError::Provider(e.to_string()))?
            .body_mut()
            .read_json()
            .map_err(|e| RetrievalError::Provider(e.to_string()))?;
        let raw = body
            .get("embedding")
            .or_else(|| body.pointer("/data/0/embedding"))
            .ok_or_else(|| RetrievalError::Provider("response carries no embedding".into()))?;
        let values: Vec<f64> =
            serde_json::from_value(raw.clone()).map_err(|e| RetrievalError::Provider(e.to_string()))?;
        let v = EmbeddingVector::new(values)?;
        if v.dimension() != self.dimension {
            return Err(RetrievalError::DimensionMismatch { expected: self.dimension, actual: v.dimension() });
        }
        Ok(v)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheRecord {
    content_hash: String,
    provider_id: String,
    vector: EmbeddingVector,
}

/// Memoizes an embedder on the content hash of the input text, optionally
/// persisting entries to an append-only line-delimited file.
pub struct CachedEmbedder<E> {
    inner: E,
    memo: RwLock<HashMap<String, EmbeddingVector>>,
    file: Option<Mutex<File>>,
    path: Option<PathBuf>,
}

impl<E: Embedder> CachedEmbedder<E> {
    pub fn in_memory(inner: E) -> Self {
        Self { inner, memo: RwLock::new(HashMap::new()), file: None, path: None }
    }

    /// Loads entries recorded for this provider from `path` and appends new
    /// ones to it.
    pub fn with_file(inner: E, path: &Path) -> Result<Self, RetrievalError> {
        let mut memo = HashMap::new();
        if path.exists() {
            for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let r: CacheRecord = serde_json::from_str(&line)
                    .map_err(|e| RetrievalError::Cache(format!("{}:{}: {e}", path.display(), i + 1)))?;
                if r.provider_id == inner.provider_id() {
                    memo.insert(r.content_hash, r.vector);
                }
            }
        } else if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { inner, memo: RwLock::new(memo), file: Some(Mutex::new(file)), path: Some(path.to_path_buf()) })
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }

    pub fn cache_path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.memo.read().expect("embedding cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<E: Embedder> Embedder for CachedEmbedder<E> {
    fn provider_id(&self) -> &str {
        self.inner.provider_id()
    }

    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, RetrievalError> {
        let hash = content_hash(text);
        if let Some(v) = self.memo.read().expect("embedding cache poisoned").get(&hash) {
            return Ok(v.clone());
        }
        let v = self.inner.embed(text)?;
        let mut memo = self.memo.write().expect("embedding cache poisoned");
        if memo.contains_key(&hash) {
            return Ok(v);
        }
        if let Some(file) = &self.file {
            let rec = CacheRecord { content_hash: hash.clone(), provider_id: self.provider_id().to_string(), vector: v.clone() };
            let mut line = serde_json::to_string(&rec).map_err(|e| RetrievalError::Cache(e.to_string()))?;
            line.push('\n');
            file.lock().expect("embedding cache file poisoned").write_all(line.as_bytes())?;
        }
        memo.insert(hash, v.clone());
        Ok(v)
    }
}
