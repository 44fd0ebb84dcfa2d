//! Requirement corpora: loading, classification, message extraction and
//! synthetic ground-truth generation.

mod classify;
mod load;
mod messages;
mod synth;
pub mod templates;

use std::collections::{BTreeMap, HashSet};

use serde::Serialize;
use thiserror::Error;

pub use classify::{
    classify_action_slot, classify_system_dtc, classify_variation, infer_condition_kind,
    mask_trigger_clause, trigger_clause_count,
};
pub use load::{load_corpus, load_corpus_with, write_corpus, write_links, LinkRecord, StakeholderRecord, SystemRecord};
pub use messages::{
    extract_messages, is_message_identifier, MessageExtractor, DECORATION_PREFIXES, DOMAIN_STOPWORDS,
    ENGLISH_STOPWORDS,
};
pub use synth::{generate_synthetic_corpus, SynthesisConfig, SyntheticCorpus};

use crate::model::{
    normalize_requirement_text, LabeledExample, PairKey, StakeholderRequirement, SystemRequirement,
    TraceLink, Variation,
};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{file}:{line}: malformed record: {reason}")]
    Malformed { file: String, line: usize, reason: String },
    #[error("{file}:{line}: compound stakeholder requirement `{id}` ({clauses} trigger clauses); split it before loading")]
    Compound { file: String, line: usize, id: String, clauses: usize },
    #[error("link references unknown id `{0}`")]
    DanglingId(String),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("duplicate link {0}")]
    DuplicateLink(PairKey),
    #[error("invalid synthesis config: {0}")]
    InvalidConfig(String),
    #[error("infeasible synthesis config: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Stakeholders, systems and the recorded links between them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Corpus {
    stakeholders: Vec<StakeholderRequirement>,
    systems: Vec<SystemRequirement>,
    links: Vec<TraceLink>,
    #[serde(skip)]
    stake_index: BTreeMap<String, usize>,
    #[serde(skip)]
    sys_index: BTreeMap<String, usize>,
}

impl Corpus {
    /// Builds a corpus, checking id uniqueness and link integrity.
    pub fn new(
        stakeholders: Vec<StakeholderRequirement>,
        systems: Vec<SystemRequirement>,
        links: Vec<TraceLink>,
    ) -> Result<Self, CorpusError> {
        let mut stake_index = BTreeMap::new();
        for (i, s) in stakeholders.iter().enumerate() {
            if stake_index.insert(s.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId(s.id.clone()));
            }
        }
        let mut sys_index = BTreeMap::new();
        for (i, s) in systems.iter().enumerate() {
            if stake_index.contains_key(&s.id) || sys_index.insert(s.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId(s.id.clone()));
            }
        }
        let mut seen = HashSet::new();
        for l in &links {
            if !stake_index.contains_key(&l.stake_id) {
                return Err(CorpusError::DanglingId(l.stake_id.clone()));
            }
            if !sys_index.contains_key(&l.sys_id) {
                return Err(CorpusError::DanglingId(l.sys_id.clone()));
            }
            if !seen.insert(l.key()) {
                return Err(CorpusError::DuplicateLink(l.key()));
            }
        }
        Ok(Self { stakeholders, systems, links, stake_index, sys_index })
    }

    pub fn stakeholders(&self) -> &[StakeholderRequirement] {
        &self.stakeholders
    }

    pub fn systems(&self) -> &[SystemRequirement] {
        &self.systems
    }

    pub fn links(&self) -> &[TraceLink] {
        &self.links
    }

    pub fn stakeholder(&self, id: &str) -> Option<&StakeholderRequirement> {
        self.stake_index.get(id).map(|&i| &self.stakeholders[i])
    }

    pub fn system(&self, id: &str) -> Option<&SystemRequirement> {
        self.sys_index.get(id).map(|&i| &self.systems[i])
    }

    pub fn linked_pairs(&self) -> HashSet<PairKey> {
        self.links.iter().map(TraceLink::key).collect()
    }

    /// Labeled links as retrieval examples, in link order.
    pub fn labeled_examples(&self) -> Vec<LabeledExample> {
        self.links
            .iter()
            .filter_map(|l| {
                let label = l.label.binary()?;
                Some(LabeledExample {
                    example_id: example_id_for(&l.stake_id, &l.sys_id),
                    stakeholder: self.stakeholder(&l.stake_id)?.clone(),
                    system: self.system(&l.sys_id)?.clone(),
                    label,
                })
            })
            .collect()
    }

    /// Distinct known variations among stakeholders.
    pub fn variations_present(&self) -> Vec<Variation> {
        let mut v: Vec<_> = self
            .stakeholders
            .iter()
            .map(|s| s.variation)
            .filter(|v| *v != Variation::Unknown)
            .collect();
        v.sort();
        v.dedup();
        v
    }

    /// Copy of this corpus with a different link list.
    pub fn with_links(&self, links: Vec<TraceLink>) -> Result<Self, CorpusError> {
        Corpus::new(self.stakeholders.clone(), self.systems.clone(), links)
    }
}

/// Example id used for a labeled link.
pub fn example_id_for(stake_id: &str, sys_id: &str) -> String {
    format!("{stake_id}|{sys_id}")
}

/// Classifies raw stakeholder text. `variation_override` wins over the
/// template classifier; the DTC type and condition kind always follow the
/// resulting variation.
pub fn classify_stakeholder(
    id: impl Into<String>,
    text: &str,
    variation_override: Option<Variation>,
    extractor: &MessageExtractor,
) -> StakeholderRequirement {
    let text = normalize_requirement_text(text);
    let variation = variation_override.unwrap_or_else(|| classify_variation(&text));
    StakeholderRequirement {
        id: id.into(),
        variation,
        dtc_type: variation.dtc_type(),
        condition_kind: infer_condition_kind(variation, &text),
        action_slot: classify_action_slot(&text),
        messages: extractor.extract(&text),
        text,
    }
}

/// Builds a system requirement from its condition blocks.
pub fn build_system(
    id: impl Into<String>,
    name: impl Into<String>,
    mature: &str,
    demature: &str,
    extractor: &MessageExtractor,
) -> SystemRequirement {
    let name = name.into();
    let mature_text = normalize_requirement_text(mature);
    let demature_text = normalize_requirement_text(demature);
    SystemRequirement {
        id: id.into(),
        dtc_type: classify_system_dtc(&name, &format!("{mature_text} {demature_text}")),
        mature_messages: extractor.extract(&mature_text),
        demature_messages: extractor.extract(&demature_text),
        name,
        mature_text,
        demature_text,
    }
}
