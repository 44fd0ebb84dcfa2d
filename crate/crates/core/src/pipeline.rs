//! The retrieve → prompt → complete → parse pipeline for one pair.

use std::collections::BTreeSet;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::gateway::{Gateway, GatewayError};
use crate::model::{
    Decision, LabeledExample, StakeholderRequirement, StrategyKind, SystemRequirement, Variation, Verdict,
};
use crate::prompting::{
    build_prompt, interleave, majority_vote, parse_verdict, select_fewshot_examples, with_clarification,
    ParsedVerdict, PromptError, StrategyConfig,
};
use crate::retrieval::{
    requirement_pair_text, retrieve_examples, Embedder, Metric, RetrievalConfig, RetrievalDatabase, RetrievalError,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error("response stayed ambiguous after a clarification retry: {raw:?}")]
    Ambiguous { raw: String },
}

/// One pair to judge, with the example ids and variation that retrieval
/// must leave out.
#[derive(Debug, Clone)]
pub struct ValidationQuery<'a> {
    pub stakeholder: &'a StakeholderRequirement,
    pub system: &'a SystemRequirement,
    pub exclusion: BTreeSet<String>,
    pub variation_exclusion: Option<Variation>,
}

impl<'a> ValidationQuery<'a> {
    pub fn new(stakeholder: &'a StakeholderRequirement, system: &'a SystemRequirement) -> Self {
        Self { stakeholder, system, exclusion: BTreeSet::new(), variation_exclusion: None }
    }

    pub fn excluding(mut self, example_id: impl Into<String>) -> Self {
        self.exclusion.insert(example_id.into());
        self
    }

    pub fn excluding_variation(mut self, v: Variation) -> Self {
        self.variation_exclusion = Some(v);
        self
    }
}

/// Anything that can judge a pair. Closures qualify, so tests can plug in
/// constant or scripted verdicts without a provider.
pub trait VerdictFn: Send + Sync {
    fn verdict(&self, query: &ValidationQuery<'_>) -> Result<Verdict, PipelineError>;
}

impl<F> VerdictFn for F
where
    F: Fn(&ValidationQuery<'_>) -> Result<Verdict, PipelineError> + Send + Sync,
{
    fn verdict(&self, query: &ValidationQuery<'_>) -> Result<Verdict, PipelineError> {
        self(query)
    }
}

/// A verdict that always answers `decision`.
pub fn constant_verdict(decision: Decision) -> impl VerdictFn {
    move |_q: &ValidationQuery<'_>| {
        Ok(Verdict {
            decision,
            raw_response: decision.to_string(),
            explanation: None,
            strategy: StrategyKind::ZeroShot,
            votes: None,
            retrieved_example_ids: None,
        })
    }
}

/// The full validator: strategy-specific prompting over a gateway, with
/// retrieval for RAG and a labeled pool for Few-Shot-16.
#[derive(Clone)]
pub struct Validator {
    strategy: StrategyConfig,
    gateway: Arc<Gateway>,
    embedder: Arc<dyn Embedder>,
    database: RetrievalDatabase,
    metric: Metric,
}

impl Validator {
    pub fn new(
        strategy: StrategyConfig,
        gateway: Arc<Gateway>,
        embedder: Arc<dyn Embedder>,
        database: RetrievalDatabase,
    ) -> Result<Self, PipelineError> {
        strategy.validate()?;
        Ok(Self { strategy, gateway, embedder, database, metric: Metric::Cosine })
    }

    pub fn with_metric(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }

    pub fn strategy(&self) -> &StrategyConfig {
        &self.strategy
    }

    pub fn database(&self) -> &RetrievalDatabase {
        &self.database
    }

    pub fn gateway(&self) -> &Arc<Gateway> {
        &self.gateway
    }

    fn examples_for(&self, q: &ValidationQuery<'_>) -> Result<(Option<Vec<LabeledExample>>, Option<Vec<String>>), PipelineError> {
        match self.strategy.kind {
            StrategyKind::Rag => {
                let query = self.embedder.embed(&requirement_pair_text(q.stakeholder, q.system))?;
                let config = RetrievalConfig {
                    k: self.strategy.k,
                    metric: self.metric,
                    exclusion: q.exclusion.clone(),
                    variation_exclusion: q.variation_exclusion,
                };
                let result = retrieve_examples(&self.database, &query, &config)?;
                let valid: Vec<LabeledExample> = result.valid.iter().map(|s| s.example().clone()).collect();
                let invalid: Vec<LabeledExample> = result.invalid.iter().map(|s| s.example().clone()).collect();
                let ordered = interleave(&valid, &invalid);
                let ids = ordered.iter().map(|e| e.example_id.clone()).collect();
                Ok((Some(ordered), Some(ids)))
            }
            StrategyKind::FewShot16 => {
                let pool: Vec<LabeledExample> = self
                    .database
                    .examples()
                    .filter(|e| !q.exclusion.contains(&e.example_id))
                    .cloned()
                    .collect();
                let picked = select_fewshot_examples(&pool, self.strategy.fewshot_seed)?;
                let ids = picked.iter().map(|e| e.example_id.clone()).collect();
                Ok((Some(picked), Some(ids)))
            }
            _ => Ok((None, None)),
        }
    }

    /// One completion, parsed, with a single clarification retry.
    fn ask(&self, prompt: &str, temperature: Option<f64>, sample: u32) -> Result<(ParsedVerdict, String), PipelineError> {
        let raw = self.gateway.complete_with(prompt, temperature, sample)?;
        let parsed = parse_verdict(&raw);
        if parsed != ParsedVerdict::Ambiguous {
            return Ok((parsed, raw));
        }
        let raw = self.gateway.complete_with(&with_clarification(prompt), temperature, sample)?;
        Ok((parse_verdict(&raw), raw))
    }
}

impl VerdictFn for Validator {
    fn verdict(&self, q: &ValidationQuery<'_>) -> Result<Verdict, PipelineError> {
        let (examples, ids) = self.examples_for(q)?;
        let envelope = build_prompt(&self.strategy, q.stakeholder, q.system, examples.as_deref())?;
        let kind = self.strategy.kind;
        let wants_explanation = self.strategy.explanation_mode || matches!(kind, StrategyKind::CoT | StrategyKind::SelfConsistency);

        if kind == StrategyKind::SelfConsistency {
            let temperature = Some(self.strategy.run_temperature);
            let runs: Vec<(ParsedVerdict, String)> = (0..self.strategy.runs)
                .into_par_iter()
                .map(|i| self.ask(&envelope.text, temperature, i))
                .collect::<Result<_, _>>()?;
            let parsed: Vec<ParsedVerdict> = runs.iter().map(|(p, _)| *p).collect();
            let (decision, tally) = majority_vote(&parsed)?;
            // report the first run that agrees with the majority
            let raw = runs
                .iter()
                .find(|(p, _)| p.decision() == Some(decision))
                .map(|(_, r)| r.clone())
                .unwrap_or_default();
            return Ok(Verdict {
                decision,
                explanation: Some(raw.clone()),
                raw_response: raw,
                strategy: kind,
                votes: Some(tally),
                retrieved_example_ids: ids,
            });
        }

        let (parsed, raw) = self.ask(&envelope.text, None, 0)?;
        let decision = parsed.decision().ok_or_else(|| PipelineError::Ambiguous { raw: raw.clone() })?;
        Ok(Verdict {
            decision,
            explanation: wants_explanation.then(|| raw.clone()),
            raw_response: raw,
            strategy: kind,
            votes: None,
            retrieved_example_ids: ids,
        })
    }
}
