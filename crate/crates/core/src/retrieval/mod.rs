//! Pair embeddings, the labeled example database and exact top-k retrieval.

mod database;
mod embed;
mod vector;

use thiserror::Error;

pub use database::{
    pair_text, requirement_pair_text, retrieve_examples, Metric, RetrievalConfig, RetrievalDatabase,
    RetrievalResult, ScoredExample,
};
pub use embed::{
    content_hash, CachedEmbedder, Embedder, HttpEmbedder, LexicalEmbedder, PrecomputedEmbedder, LEXICAL_DIMENSION,
};
pub use vector::{cosine_similarity, euclidean_distance, EmbeddingVector};

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("degenerate (all-zero) vector has no cosine similarity")]
    DegenerateVector,
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("retrieval database is empty")]
    EmptyDatabase,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("duplicate example id `{0}`")]
    DuplicateExample(String),
    #[error("{examples} examples but {vectors} vectors")]
    LengthMismatch { examples: usize, vectors: usize },
    #[error("embedding provider failure: {0}")]
    Provider(String),
    #[error("embedding cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
