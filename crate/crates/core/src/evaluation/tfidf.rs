use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::LazyLock;

use regex::Regex;

use super::EvalError;
use crate::corpus::ENGLISH_STOPWORDS;
use crate::retrieval::{Embedder, EmbeddingVector, RetrievalError};

static TOKEN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[A-Za-z0-9_]+").unwrap());

/// Lowercased word tokens minus English stopwords.
pub fn tfidf_tokens(text: &str, stopwords: &HashSet<String>) -> Vec<String> {
    TOKEN
        .find_iter(text)
        .map(|m| m.as_str().to_ascii_lowercase())
        .filter(|t| !stopwords.contains(t))
        .collect()
}

/// TF-IDF with smoothed idf `ln((1 + N) / (1 + df)) + 1` and L2
/// normalization. Terms are indexed in lexicographic order.
#[derive(Debug, Clone)]
pub struct TfidfModel {
    vocabulary: BTreeMap<String, usize>,
    idf: Vec<f64>,
    stopwords: HashSet<String>,
}

impl TfidfModel {
    pub fn fit<S: AsRef<str>>(documents: &[S]) -> Result<Self, EvalError> {
        if documents.is_empty() {
            return Err(EvalError::InvalidInput("tf-idf needs at least one document".into()));
        }
        let stopwords: HashSet<String> = ENGLISH_STOPWORDS.iter().map(|s| s.to_ascii_lowercase()).collect();
        let mut df: BTreeMap<String, u64> = BTreeMap::new();
        for d in documents {
            let uniq: BTreeSet<String> = tfidf_tokens(d.as_ref(), &stopwords).into_iter().collect();
            for t in uniq {
                *df.entry(t).or_insert(0) += 1;
            }
        }
        if df.is_empty() {
            return Err(EvalError::InvalidInput("tf-idf vocabulary is empty".into()));
        }
        let n = documents.len() as f64;
        let idf = df.values().map(|&f| ((1.0 + n) / (1.0 + f as f64)).ln() + 1.0).collect();
        let vocabulary = df.into_keys().enumerate().map(|(i, t)| (t, i)).collect();
        Ok(Self { vocabulary, idf, stopwords })
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.vocabulary.keys().map(String::as_str)
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.vocabulary.get(term).map(|&i| self.idf[i])
    }

    /// Out-of-vocabulary terms are ignored; a text with none left is the zero vector.
    pub fn transform(&self, text: &str) -> EmbeddingVector {
        let mut v = vec![0.0; self.idf.len()];
        for t in tfidf_tokens(text, &self.stopwords) {
            if let Some(&i) = self.vocabulary.get(&t) {
                v[i] += 1.0;
            }
        }
        for (x, idf) in v.iter_mut().zip(&self.idf) {
            *x *= idf;
        }
        EmbeddingVector::new(v).expect("finite weights").normalized()
    }
}

impl Embedder for TfidfModel {
    fn provider_id(&self) -> &str {
        "tfidf"
    }

    fn dimension(&self) -> usize {
        self.idf.len()
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, RetrievalError> {
        Ok(self.transform(text))
    }
}

/// Fits on `documents` and returns one vector per document.
pub fn tfidf_vectors<S: AsRef<str>>(documents: &[S]) -> Result<Vec<EmbeddingVector>, EvalError> {
    let model = TfidfModel::fit(documents)?;
    Ok(documents.iter().map(|d| model.transform(d.as_ref())).collect())
}
