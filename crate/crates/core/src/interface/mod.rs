//! Operational surface: configuration, the example store and review queue,
//! the engine shared by the CLI and the HTTP service.

pub mod cli;
mod config;
mod service;
mod store;

use std::collections::HashSet;
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{AppConfig, EmbedderKind, EmbedderSection, ProviderKind, ProviderSection, ServerSection};
pub use service::{router, ServerHandle};
pub use store::{
    DecisionReceipt, ExampleStore, FaultPoint, Page, QueueFilter, QueuePage, ReviewDecision, ReviewItem, ReviewStatus,
    StoreError, StoreSnapshot,
};

use crate::corpus::{build_system, classify_stakeholder, Corpus, CorpusError, MessageExtractor};
use crate::evaluation::ReportRecord;
use crate::gateway::{Gateway, GatewayError};
use crate::model::{Decision, LabeledExample, StakeholderRequirement, StrategyKind, SystemRequirement};
use crate::pipeline::{PipelineError, ValidationQuery, Validator, VerdictFn};
use crate::prompting::{split_system_block, StrategyConfig};
use crate::recovery::{recover_links_with_progress, PrefilterOptions, RecoveryOutcome};
use crate::retrieval::{requirement_pair_text, Embedder, RetrievalDatabase, RetrievalError};

#[derive(Debug, Error)]
pub enum InterfaceError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("upstream error: {0}")]
    Upstream(String),
    #[error("cannot process request: {0}")]
    Unprocessable(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Other(String),
}

impl From<StoreError> for InterfaceError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(_) => InterfaceError::NotFound(e.to_string()),
            StoreError::Conflict { .. } => InterfaceError::Conflict(e.to_string()),
            StoreError::InvalidFilter(_) => InterfaceError::BadRequest(e.to_string()),
            other => InterfaceError::Other(other.to_string()),
        }
    }
}

impl From<crate::evaluation::EvalError> for InterfaceError {
    fn from(e: crate::evaluation::EvalError) -> Self {
        InterfaceError::Unprocessable(e.to_string())
    }
}

impl From<GatewayError> for InterfaceError {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::InvalidConfig(_) | GatewayError::Cache(_) => InterfaceError::Config(e.to_string()),
            GatewayError::TokenBudget { .. } => InterfaceError::Unprocessable(e.to_string()),
            other => InterfaceError::Upstream(other.to_string()),
        }
    }
}

impl From<RetrievalError> for InterfaceError {
    fn from(e: RetrievalError) -> Self {
        match e {
            RetrievalError::Provider(_) => InterfaceError::Upstream(e.to_string()),
            RetrievalError::Cache(_) | RetrievalError::Io(_) => InterfaceError::Config(e.to_string()),
            other => InterfaceError::Unprocessable(other.to_string()),
        }
    }
}

impl From<PipelineError> for InterfaceError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Gateway(g) => g.into(),
            PipelineError::Retrieval(r) => r.into(),
            PipelineError::Prompt(p) => InterfaceError::Unprocessable(p.to_string()),
            PipelineError::Ambiguous { .. } => InterfaceError::Upstream(e.to_string()),
        }
    }
}

/// Body of a validate request. The stakeholder is given by id or text; the
/// system by id, by its two condition blocks, or by a rendered
/// `Mature: ... Demature: ...` text.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateRequest {
    pub stake_id: Option<String>,
    pub stake_text: Option<String>,
    pub sys_id: Option<String>,
    pub sys_name: Option<String>,
    pub sys_mature: Option<String>,
    pub sys_demature: Option<String>,
    pub sys_text: Option<String>,
    pub strategy: Option<StrategyKind>,
    pub k: Option<usize>,
    pub explanation_mode: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateResponse {
    pub verdict: Decision,
    pub explanation: Option<String>,
    pub retrieved_example_ids: Vec<String>,
    pub raw_response: String,
    pub vote_share: f64,
    pub store_version: u64,
}

struct DbState {
    database: RetrievalDatabase,
    /// Store examples already embedded.
    synced: usize,
    store_version: u64,
}

/// Corpus, store, retrieval database and gateway behind one handle.
pub struct Engine {
    config: AppConfig,
    extractor: MessageExtractor,
    corpus: Arc<Corpus>,
    store: Arc<ExampleStore>,
    gateway: Arc<Gateway>,
    embedder: Arc<dyn Embedder>,
    db: RwLock<DbState>,
    decide_lock: Mutex<()>,
}

impl Engine {
    /// The retrieval database starts as the corpus's labeled links plus
    /// every example already in the store.
    pub fn new(
        config: AppConfig,
        corpus: Arc<Corpus>,
        store: Arc<ExampleStore>,
        gateway: Arc<Gateway>,
        embedder: Arc<dyn Embedder>,
    ) -> Result<Self, InterfaceError> {
        let extractor = config.extractor()?;
        let database = RetrievalDatabase::build(corpus.labeled_examples(), embedder.as_ref())?;
        let engine = Self {
            config,
            extractor,
            corpus,
            store,
            gateway,
            embedder,
            db: RwLock::new(DbState { database, synced: 0, store_version: 0 }),
            decide_lock: Mutex::new(()),
        };
        engine.sync_database()?;
        Ok(engine)
    }

    /// Builds everything from a config: corpus from `corpus_dir`, store at `store_path`.
    pub fn from_config(config: AppConfig) -> Result<Self, InterfaceError> {
        let extractor = config.extractor()?;
        let dir = &config.corpus_dir;
        let corpus = crate::corpus::load_corpus_with(
            &dir.join("stakeholders.jsonl"),
            &dir.join("systems.jsonl"),
            &dir.join("links.jsonl"),
            &extractor,
        )?;
        let store = ExampleStore::open(&config.store_path)?;
        let gateway = config.build_gateway()?;
        let embedder = config.build_embedder()?;
        Self::new(config, Arc::new(corpus), Arc::new(store), Arc::new(gateway), embedder)
    }

    pub fn config(&self) -> &AppConfig {
        &self.config
    }

    pub fn corpus(&self) -> &Arc<Corpus> {
        &self.corpus
    }

    pub fn store(&self) -> &Arc<ExampleStore> {
        &self.store
    }

    pub fn gateway(&self) -> &Arc<Gateway> {
        &self.gateway
    }

    /// Embeds store examples the database has not seen yet. Store examples
    /// whose id collides with a corpus link are not added twice.
    pub fn sync_database(&self) -> Result<u64, InterfaceError> {
        let snap = self.store.snapshot();
        {
            let db = self.db.read().unwrap();
            if db.synced >= snap.examples.len() {
                return Ok(db.store_version.max(snap.version));
            }
        }
        let mut db = self.db.write().unwrap();
        // another writer may have synced meanwhile; resnapshot under the lock
        let snap = self.store.snapshot();
        let mut seen: HashSet<String> = db.database.examples().map(|e| e.example_id.clone()).collect();
        for e in &snap.examples[db.synced..] {
            if seen.insert(e.example_id.clone()) {
                let v = self.embedder.embed(&requirement_pair_text(&e.stakeholder, &e.system))?;
                db.database = db.database.with_appended(e.clone(), v)?;
            }
            db.synced += 1;
        }
        db.store_version = snap.version;
        Ok(snap.version)
    }

    /// The database and the store version it reflects.
    pub fn database(&self) -> Result<(RetrievalDatabase, u64), InterfaceError> {
        self.sync_database()?;
        let db = self.db.read().unwrap();
        Ok((db.database.clone(), db.store_version))
    }

    pub fn validator(&self, strategy: StrategyConfig) -> Result<(Validator, u64), InterfaceError> {
        let (database, version) = self.database()?;
        let v = Validator::new(strategy, self.gateway.clone(), self.embedder.clone(), database)?
            .with_metric(self.config.metric);
        Ok((v, version))
    }

    fn resolve_stakeholder(&self, req: &ValidateRequest) -> Result<StakeholderRequirement, InterfaceError> {
        match (&req.stake_id, &req.stake_text) {
            (Some(id), _) => self
                .corpus
                .stakeholder(id)
                .cloned()
                .ok_or_else(|| InterfaceError::NotFound(format!("stakeholder requirement `{id}`"))),
            (None, Some(text)) => Ok(classify_stakeholder("adhoc-stakeholder", text, None, &self.extractor)),
            (None, None) => Err(InterfaceError::BadRequest("missing field `stake_id` (or `stake_text`)".into())),
        }
    }

    fn resolve_system(&self, req: &ValidateRequest) -> Result<SystemRequirement, InterfaceError> {
        let name = req.sys_name.as_deref().unwrap_or("");
        if let Some(id) = &req.sys_id {
            return self
                .corpus
                .system(id)
                .cloned()
                .ok_or_else(|| InterfaceError::NotFound(format!("system requirement `{id}`")));
        }
        match (&req.sys_mature, &req.sys_demature, &req.sys_text) {
            (Some(m), Some(d), _) => Ok(build_system("adhoc-system", name, m, d, &self.extractor)),
            (None, None, Some(text)) => {
                let (m, d) = split_system_block(text).unwrap_or((text.as_str(), ""));
                Ok(build_system("adhoc-system", name, m, d, &self.extractor))
            }
            (Some(_), None, _) => Err(InterfaceError::BadRequest("missing field `sys_demature`".into())),
            (None, Some(_), _) => Err(InterfaceError::BadRequest("missing field `sys_mature`".into())),
            (None, None, None) => Err(InterfaceError::BadRequest(
                "missing field `sys_id` (or `sys_mature` and `sys_demature`, or `sys_text`)".into(),
            )),
        }
    }

    pub fn strategy_for(&self, kind: Option<StrategyKind>, k: Option<usize>, explanation: Option<bool>) -> StrategyConfig {
        let mut s = self.config.strategy.clone();
        if let Some(kind) = kind {
            s.kind = kind;
        }
        if let Some(k) = k {
            s.k = k;
        }
        if let Some(e) = explanation {
            s.explanation_mode = e;
        }
        s
    }

    /// Runs the full pipeline for one pair against the current store version.
    pub fn handle_validate(&self, req: &ValidateRequest) -> Result<ValidateResponse, InterfaceError> {
        let stakeholder = self.resolve_stakeholder(req)?;
        let system = self.resolve_system(req)?;
        let strategy = self.strategy_for(req.strategy, req.k, req.explanation_mode);
        let (validator, store_version) = self.validator(strategy)?;
        let mut query = ValidationQuery::new(&stakeholder, &system);
        // a pair already in the database must not be its own example
        query.exclusion.insert(crate::corpus::example_id_for(&stakeholder.id, &system.id));
        let v = validator.verdict(&query)?;
        Ok(ValidateResponse {
            vote_share: v.vote_share(),
            verdict: v.decision,
            explanation: v.explanation,
            retrieved_example_ids: v.retrieved_example_ids.unwrap_or_default(),
            raw_response: v.raw_response,
            store_version,
        })
    }

    /// Records a review decision and makes the new example retrievable
    /// before returning.
    pub fn record_review_decision(
        &self,
        item_id: &str,
        decision: ReviewDecision,
        reviewer: &str,
    ) -> Result<DecisionReceipt, InterfaceError> {
        let _serial = self.decide_lock.lock().unwrap();
        let receipt = self.store.record_review_decision(item_id, decision, reviewer)?;
        self.sync_database()?;
        Ok(receipt)
    }

    /// Recovers links with the given strategy and queues them for review.
    pub fn run_recovery(
        &self,
        strategy: StrategyConfig,
        progress: impl Fn(usize, usize) + Send + Sync,
    ) -> Result<(RecoveryOutcome, usize), InterfaceError> {
        let (validator, _) = self.validator(strategy)?;
        let options = PrefilterOptions { mask_trigger: self.config.mask_trigger, extractor: self.extractor.clone() };
        let outcome = recover_links_with_progress(&self.corpus, &validator as &dyn VerdictFn, &options, progress);
        let added = self.enqueue_recovered(&outcome)?;
        Ok((outcome, added))
    }

    pub fn enqueue_recovered(&self, outcome: &RecoveryOutcome) -> Result<usize, InterfaceError> {
        let items = outcome.recovered.iter().filter_map(|r| {
            let s = self.corpus.stakeholder(&r.stake_id)?.clone();
            let t = self.corpus.system(&r.sys_id)?.clone();
            Some(ReviewItem::from_recovered(r.clone(), s, t))
        });
        Ok(self.store.enqueue(items)?)
    }

    /// Latest metrics record in the reports file, if any.
    pub fn latest_metrics(&self) -> Result<Option<ReportRecord>, InterfaceError> {
        let path = &self.config.reports_path;
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(path)?;
        Ok(text
            .lines()
            .rev()
            .filter_map(|l| serde_json::from_str::<ReportRecord>(l).ok())
            .find(|r| matches!(r, ReportRecord::Metrics { .. })))
    }

    /// Labeled examples the engine can retrieve from.
    pub fn labeled_examples(&self) -> Result<Vec<LabeledExample>, InterfaceError> {
        Ok(self.database()?.0.examples().cloned().collect())
    }
}
