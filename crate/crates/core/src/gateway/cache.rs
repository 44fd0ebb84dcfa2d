use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::GatewayError;

/// One recorded provider round trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub prompt_hash: String,
    pub prompt_text: String,
    pub response_text: String,
    pub provider_id: String,
    pub model_name: String,
    pub temperature: f64,
    #[serde(default)]
    pub sample: u32,
    pub timestamp: String,
    pub latency_ms: u64,
}

/// Cache key over everything that can change a response.
pub fn cache_key(provider_id: &str, model: &str, temperature: f64, sample: u32, prompt: &str) -> String {
    let mut h = Sha256::new();
    for part in [provider_id, model, &format!("{temperature:?}"), &sample.to_string(), prompt] {
        h.update(part.as_bytes());
        h.update([0u8]);
    }
    hex::encode(h.finalize())
}

/// Append-only JSONL file of [`CompletionRecord`]s with an in-memory index.
/// Later records for the same key win.
pub struct ReplayCache {
    path: Option<PathBuf>,
    index: RwLock<HashMap<String, CompletionRecord>>,
    writer: Mutex<Option<File>>,
}

impl ReplayCache {
    pub fn in_memory() -> Self {
        Self { path: None, index: RwLock::new(HashMap::new()), writer: Mutex::new(None) }
    }

    /// Opens (creating if absent) a cache file. A torn final line from an
    /// interrupted write is ignored.
    pub fn open(path: &Path) -> Result<Self, GatewayError> {
        let mut index = HashMap::new();
        if path.exists() {
            let file = File::open(path).map_err(|e| GatewayError::Cache(e.to_string()))?;
            let lines: Vec<String> =
                BufReader::new(file).lines().collect::<Result<_, _>>().map_err(|e| GatewayError::Cache(e.to_string()))?;
            let last = lines.len().saturating_sub(1);
            for (i, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CompletionRecord>(line) {
                    Ok(r) => {
                        index.insert(r.prompt_hash.clone(), r);
                    }
                    Err(_) if i == last => {}
                    Err(e) => return Err(GatewayError::Cache(format!("{}:{}: {e}", path.display(), i + 1))),
                }
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| GatewayError::Cache(e.to_string()))?;
        Ok(Self { path: Some(path.to_path_buf()), index: RwLock::new(index), writer: Mutex::new(Some(file)) })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, key: &str) -> Option<CompletionRecord> {
        self.index.read().unwrap().get(key).cloned()
    }

    pub fn len(&self) -> usize {
        self.index.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn append(&self, record: CompletionRecord) -> Result<(), GatewayError> {
        let mut writer = self.writer.lock().unwrap();
        if let Some(file) = writer.as_mut() {
            let mut line = serde_json::to_string(&record).map_err(|e| GatewayError::Cache(e.to_string()))?;
            line.push('\n');
            file.write_all(line.as_bytes()).map_err(|e| GatewayError::Cache(e.to_string()))?;
            file.flush().map_err(|e| GatewayError::Cache(e.to_string()))?;
        }
        self.index.write().unwrap().insert(record.prompt_hash.clone(), record);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(key: &str, resp: &str) -> CompletionRecord {
        CompletionRecord {
            prompt_hash: key.into(),
            prompt_text: "p".into(),
            response_text: resp.into(),
            provider_id: "mock".into(),
            model_name: "m".into(),
            temperature: 0.0,
            sample: 0,
            timestamp: "2024-01-01T00:00:00Z".into(),
            latency_ms: 1,
        }
    }

    #[test]
    fn key_separates_fields() {
        let a = cache_key("p", "m", 0.0, 0, "x");
        assert_ne!(a, cache_key("p", "m", 0.0, 1, "x"));
        assert_ne!(a, cache_key("p", "m", 0.5, 0, "x"));
        assert_ne!(cache_key("ab", "c", 0.0, 0, "x"), cache_key("a", "bc", 0.0, 0, "x"));
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn reopen_keeps_records_and_skips_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        {
            let c = ReplayCache::open(&path).unwrap();
            c.append(record("k1", "Yes")).unwrap();
            c.append(record("k1", "No")).unwrap();
            c.append(record("k2", "Yes")).unwrap();
        }
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"prompt_hash\":\"k3\",\"resp").unwrap();
        drop(f);
        let c = ReplayCache::open(&path).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.get("k1").unwrap().response_text, "No");
        assert!(c.get("k3").is_none());
    }
}
