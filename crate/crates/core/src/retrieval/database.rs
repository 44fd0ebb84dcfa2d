use std::cmp::Ordering;
use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cosine_similarity, euclidean_distance, Embedder, EmbeddingVector, RetrievalError};
use crate::model::{normalize_requirement_text, Label, LabeledExample, StakeholderRequirement, SystemRequirement, Variation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Cosine,
    Euclidean,
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cosine" => Ok(Metric::Cosine),
            "euclidean" => Ok(Metric::Euclidean),
            other => Err(format!("unknown metric `{other}`")),
        }
    }
}

/// Stakeholder text and system text joined by one space.
pub fn pair_text(stakeholder_text: &str, system_text: &str) -> String {
    normalize_requirement_text(&format!("{stakeholder_text} {system_text}"))
}

/// Pair text of a requirement pair; the system side is its mature and
/// demature blocks.
pub fn requirement_pair_text(stakeholder: &StakeholderRequirement, system: &SystemRequirement) -> String {
    pair_text(&stakeholder.text, &system.condition_text())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    pub k: usize,
    pub metric: Metric,
    #[serde(default)]
    pub exclusion: BTreeSet<String>,
    #[serde(default)]
    pub variation_exclusion: Option<Variation>,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self { k: 3, metric: Metric::Cosine, exclusion: BTreeSet::new(), variation_exclusion: None }
    }
}

impl RetrievalConfig {
    pub fn with_k(k: usize) -> Self {
        Self { k, ..Self::default() }
    }
}

#[derive(Debug)]
struct Entry {
    example: LabeledExample,
    vector: EmbeddingVector,
}

/// Labeled examples with their embeddings. Immutable: appending produces a
/// new database sharing the existing entries.
#[derive(Debug, Clone)]
pub struct RetrievalDatabase {
    entries: Vec<Arc<Entry>>,
    ids: Arc<HashSet<String>>,
    dimension: Option<usize>,
}

/// One retrieved example with its raw score (similarity for cosine,
/// distance for Euclidean).
#[derive(Debug, Clone)]
pub struct ScoredExample {
    entry: Arc<Entry>,
    pub score: f64,
}

impl ScoredExample {
    pub fn example(&self) -> &LabeledExample {
        &self.entry.example
    }

    pub fn id(&self) -> &str {
        &self.entry.example.example_id
    }
}

#[derive(Debug, Clone, Default)]
pub struct RetrievalResult {
    pub valid: Vec<ScoredExample>,
    pub invalid: Vec<ScoredExample>,
    pub valid_shortfall: bool,
    pub invalid_shortfall: bool,
    /// Number of entries left after exclusion filters.
    pub candidates_considered: usize,
}

impl RetrievalResult {
    pub fn ids(&self) -> Vec<String> {
        self.valid.iter().chain(&self.invalid).map(|s| s.id().to_string()).collect()
    }

    pub fn has_shortfall(&self) -> bool {
        self.valid_shortfall || self.invalid_shortfall
    }
}

impl RetrievalDatabase {
    pub fn empty() -> Self {
        Self { entries: Vec::new(), ids: Arc::new(HashSet::new()), dimension: None }
    }

    pub fn from_parts(examples: Vec<LabeledExample>, vectors: Vec<EmbeddingVector>) -> Result<Self, RetrievalError> {
        if examples.len() != vectors.len() {
            return Err(RetrievalError::LengthMismatch { examples: examples.len(), vectors: vectors.len() });
        }
        let mut db = Self::empty();
        let mut ids = HashSet::with_capacity(examples.len());
        for (example, vector) in examples.into_iter().zip(vectors) {
            match db.dimension {
                None => db.dimension = Some(vector.dimension()),
                Some(d) if d != vector.dimension() => {
                    return Err(RetrievalError::DimensionMismatch { expected: d, actual: vector.dimension() })
                }
                _ => {}
            }
            if !ids.insert(example.example_id.clone()) {
                return Err(RetrievalError::DuplicateExample(example.example_id));
            }
            db.entries.push(Arc::new(Entry { example, vector }));
        }
        db.ids = Arc::new(ids);
        Ok(db)
    }

    /// Embeds each example's pair text (in parallel) and builds the database.
    pub fn build(examples: Vec<LabeledExample>, embedder: &dyn Embedder) -> Result<Self, RetrievalError> {
        let vectors = examples
            .par_iter()
            .map(|e| embedder.embed(&requirement_pair_text(&e.stakeholder, &e.system)))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_parts(examples, vectors)
    }

    /// New database version with one more example; `self` is untouched.
    pub fn with_appended(&self, example: LabeledExample, vector: EmbeddingVector) -> Result<Self, RetrievalError> {
        if let Some(d) = self.dimension {
            if d != vector.dimension() {
                return Err(RetrievalError::DimensionMismatch { expected: d, actual: vector.dimension() });
            }
        }
        if self.ids.contains(&example.example_id) {
            return Err(RetrievalError::DuplicateExample(example.example_id));
        }
        let mut entries = self.entries.clone();
        let mut ids = (*self.ids).clone();
        ids.insert(example.example_id.clone());
        entries.push(Arc::new(Entry { example, vector: vector.clone() }));
        Ok(Self { entries, ids: Arc::new(ids), dimension: Some(vector.dimension()) })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dimension(&self) -> Option<usize> {
        self.dimension
    }

    pub fn contains(&self, example_id: &str) -> bool {
        self.ids.contains(example_id)
    }

    pub fn examples(&self) -> impl Iterator<Item = &LabeledExample> {
        self.entries.iter().map(|e| &e.example)
    }

    pub fn vectors(&self) -> impl Iterator<Item = &EmbeddingVector> {
        self.entries.iter().map(|e| &e.vector)
    }

    pub fn get(&self, example_id: &str) -> Option<&LabeledExample> {
        self.examples().find(|e| e.example_id == example_id)
    }
}

fn rank(metric: Metric, a: &ScoredExample, b: &ScoredExample) -> Ordering {
    let by_score = match metric {
        Metric::Cosine => b.score.total_cmp(&a.score),
        Metric::Euclidean => a.score.total_cmp(&b.score),
    };
    by_score.then_with(|| a.id().cmp(b.id()))
}

/// Exact top-k per label pool.
///
/// Cosine ranks by descending similarity, Euclidean by ascending distance;
/// ties go to the smaller example id. Entries with an all-zero vector have
/// no cosine similarity and are never returned under the cosine metric.
pub fn retrieve_examples(
    db: &RetrievalDatabase,
    query: &EmbeddingVector,
    config: &RetrievalConfig,
) -> Result<RetrievalResult, RetrievalError> {
    if config.k == 0 {
        return Err(RetrievalError::InvalidK);
    }
    let Some(dim) = db.dimension else {
        return Err(RetrievalError::EmptyDatabase);
    };
    if dim != query.dimension() {
        return Err(RetrievalError::DimensionMismatch { expected: dim, actual: query.dimension() });
    }
    if config.metric == Metric::Cosine && query.is_degenerate() {
        return Err(RetrievalError::DegenerateVector);
    }

    let mut valid = Vec::new();
    let mut invalid = Vec::new();
    let mut considered = 0;
    for entry in &db.entries {
        let ex = &entry.example;
        if config.exclusion.contains(&ex.example_id)
            || config.variation_exclusion.is_some_and(|v| ex.stakeholder.variation == v)
        {
            continue;
        }
        considered += 1;
        let score = match config.metric {
            Metric::Cosine if entry.vector.is_degenerate() => continue,
            Metric::Cosine => cosine_similarity(query, &entry.vector)?,
            Metric::Euclidean => euclidean_distance(query, &entry.vector)?,
        };
        let scored = ScoredExample { entry: Arc::clone(entry), score };
        match ex.label {
            Label::Valid => valid.push(scored),
            Label::Invalid => invalid.push(scored),
        }
    }

    let top = |mut pool: Vec<ScoredExample>| {
        if pool.len() > config.k {
            pool.select_nth_unstable_by(config.k - 1, |a, b| rank(config.metric, a, b));
            pool.truncate(config.k);
        }
        pool.sort_by(|a, b| rank(config.metric, a, b));
        pool
    };
    let valid = top(valid);
    let invalid = top(invalid);
    Ok(RetrievalResult {
        valid_shortfall: valid.len() < config.k,
        invalid_shortfall: invalid.len() < config.k,
        valid,
        invalid,
        candidates_considered: considered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{classify_stakeholder, templates, MessageExtractor};
    use crate::model::SystemRequirement;
    use proptest::prelude::*;

    fn example(id: &str, variation_text: &str, label: Label) -> LabeledExample {
        let ex = MessageExtractor::default();
        LabeledExample {
            example_id: id.to_string(),
            stakeholder: classify_stakeholder(format!("S-{id}"), variation_text, None, &ex),
            system: SystemRequirement {
                id: "SYS".into(),
                name: "sys".into(),
                dtc_type: crate::model::DtcType::Unknown,
                mature_text: "m".into(),
                demature_text: "d".into(),
                mature_messages: Default::default(),
                demature_messages: Default::default(),
            },
            label,
        }
    }

    fn v(x: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(x.to_vec()).unwrap()
    }

    #[test]
    fn pair_text_examples() {
        assert_eq!(pair_text("a", "b"), "a b");
        assert_eq!(pair_text("", "b"), "b");
        assert_eq!(pair_text("x y", "z"), "x y z");
    }

    #[test]
    fn exhaustive_pool() {
        let db = RetrievalDatabase::from_parts(
            vec![example("a", templates::FIG1_V1, Label::Valid), example("b", templates::FIG1_V2, Label::Invalid)],
            vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])],
        )
        .unwrap();
        let r = retrieve_examples(&db, &v(&[1.0, 1.0]), &RetrievalConfig::with_k(1)).unwrap();
        assert_eq!(r.ids(), vec!["a", "b"]);
        assert!(!r.has_shortfall());
    }

    fn six() -> RetrievalDatabase {
        let texts = [templates::FIG1_V1, templates::FIG1_V2, templates::FIG1_V3];
        let vecs = [[1.0, 0.0], [0.9, 0.1], [0.5, 0.5], [0.1, 0.9], [0.0, 1.0], [0.7, 0.3]];
        let examples = (0..6)
            .map(|i| example(&format!("e{i}"), texts[i % 3], if i % 2 == 0 { Label::Valid } else { Label::Invalid }))
            .collect();
        RetrievalDatabase::from_parts(examples, vecs.iter().map(|x| v(x)).collect()).unwrap()
    }

    #[test]
    fn exclusion_matches_brute_force() {
        // valid pool: e0 (1,0), e2 (.5,.5), e4 (0,1). Query = e0's vector, e0 excluded.
        let db = six();
        let mut cfg = RetrievalConfig::with_k(2);
        cfg.exclusion.insert("e0".into());
        let r = retrieve_examples(&db, &v(&[1.0, 0.0]), &cfg).unwrap();
        let valid: Vec<_> = r.valid.iter().map(|s| s.id()).collect();
        assert_eq!(valid, vec!["e2", "e4"]);
        let invalid: Vec<_> = r.invalid.iter().map(|s| s.id()).collect();
        assert_eq!(invalid, vec!["e1", "e5"]);
    }

    #[test]
    fn variation_exclusion_filters() {
        let db = six();
        let cfg = RetrievalConfig { k: 5, variation_exclusion: Some(Variation::V1), ..Default::default() };
        let r = retrieve_examples(&db, &v(&[1.0, 0.0]), &cfg).unwrap();
        assert!(r.valid.iter().chain(&r.invalid).all(|s| s.example().stakeholder.variation != Variation::V1));
        assert!(r.has_shortfall());
        assert_eq!(r.candidates_considered, 4);
    }

    #[test]
    fn euclidean_ranks_ascending() {
        let db = six();
        let cfg = RetrievalConfig { k: 1, metric: Metric::Euclidean, ..Default::default() };
        let r = retrieve_examples(&db, &v(&[0.0, 1.0]), &cfg).unwrap();
        assert_eq!(r.valid[0].id(), "e4");
        assert_eq!(r.invalid[0].id(), "e3");
    }

    #[test]
    fn errors() {
        let db = RetrievalDatabase::empty();
        assert!(matches!(retrieve_examples(&db, &v(&[1.0]), &RetrievalConfig::default()), Err(RetrievalError::EmptyDatabase)));
        let db = six();
        assert!(matches!(
            retrieve_examples(&db, &v(&[1.0, 0.0, 0.0]), &RetrievalConfig::default()),
            Err(RetrievalError::DimensionMismatch { .. })
        ));
        assert!(matches!(retrieve_examples(&db, &v(&[0.0, 0.0]), &RetrievalConfig::default()), Err(RetrievalError::DegenerateVector)));
        assert!(matches!(retrieve_examples(&db, &v(&[1.0, 0.0]), &RetrievalConfig::with_k(0)), Err(RetrievalError::InvalidK)));
    }

    #[test]
    fn append_is_copy_on_write() {
        let db = six();
        let next = db.with_appended(example("e9", templates::FIG1_V4, Label::Valid), v(&[1.0, 0.0])).unwrap();
        assert_eq!(db.len(), 6);
        assert_eq!(next.len(), 7);
        assert!(!db.contains("e9") && next.contains("e9"));
        assert!(matches!(
            next.with_appended(example("e9", templates::FIG1_V4, Label::Valid), v(&[1.0, 0.0])),
            Err(RetrievalError::DuplicateExample(_))
        ));
        assert!(next.with_appended(example("x", templates::FIG1_V4, Label::Valid), v(&[1.0])).is_err());
    }

    proptest! {
        #[test]
        fn cosine_ranking_scale_invariant(
            vecs in proptest::collection::vec(proptest::collection::vec(0.01..10.0f64, 4), 2..40),
            query in proptest::collection::vec(0.01..10.0f64, 4),
            scale in 0.01..100.0f64,
            k in 1usize..5,
        ) {
            let n = vecs.len();
            let examples: Vec<_> = (0..n)
                .map(|i| example(&format!("x{i:03}"), templates::FIG1_V1, if i % 3 == 0 { Label::Invalid } else { Label::Valid }))
                .collect();
            let db = RetrievalDatabase::from_parts(examples.clone(), vecs.iter().map(|x| v(x)).collect()).unwrap();
            let scaled = RetrievalDatabase::from_parts(examples, vecs.iter().map(|x| v(x).scaled(scale)).collect()).unwrap();
            let cfg = RetrievalConfig::with_k(k);
            let a = retrieve_examples(&db, &v(&query), &cfg).unwrap();
            let b = retrieve_examples(&scaled, &v(&query).scaled(scale), &cfg).unwrap();
            prop_assert_eq!(a.ids(), b.ids());
            prop_assert!(a.valid.len() <= k && a.invalid.len() <= k);
        }
    }
}
