//! Strategy-specific prompts, response parsing and vote aggregation.

mod fewshot;
mod template;
mod verdict;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fewshot::{cell_of, fewshot_cells, select_fewshot_examples, FewShotCell};
pub use template::{
    build_prompt, query_blocks, render_stakeholder, render_system, split_system_block, with_clarification,
    PromptEnvelope, CLARIFICATION, COT_INSTRUCTION, EVALUATE_EXPLAIN, EVALUATE_YES_NO, INSTRUCTION_COVERED,
    INSTRUCTION_FOCUS, RESPONSE_CUE, YES_NO_ONLY_CLAUSE,
};
pub use verdict::{majority_vote, parse_verdict, ParsedVerdict};

use crate::model::StrategyKind;

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("strategy {0} needs examples")]
    MissingExamples(StrategyKind),
    #[error("strategy {0} takes no examples")]
    UnexpectedExamples(StrategyKind),
    #[error("few-shot prompt needs exactly 16 examples, got {0}")]
    FewShotCount(usize),
    #[error("{got} examples exceed 2k = {max}")]
    TooManyExamples { got: usize, max: usize },
    #[error("no labeled example for few-shot cell {0}")]
    UncoveredCell(String),
    #[error("no decisive vote among the runs")]
    NoVotes,
    #[error("invalid strategy config: {0}")]
    InvalidStrategy(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    /// Examples per label for RAG.
    pub k: usize,
    /// Self-consistency run count.
    pub runs: u32,
    /// Sampling temperature for self-consistency runs. At 0 every run sees
    /// the same deterministic answer; diversity needs a positive value.
    pub run_temperature: f64,
    pub fewshot_seed: u64,
    pub explanation_mode: bool,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self { kind: StrategyKind::Rag, k: 3, runs: 10, run_temperature: 0.0, fewshot_seed: 0, explanation_mode: false }
    }
}

impl StrategyConfig {
    pub fn new(kind: StrategyKind) -> Self {
        Self { kind, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        if self.k == 0 {
            return Err(PromptError::InvalidStrategy("k must be at least 1".into()));
        }
        if self.runs == 0 {
            return Err(PromptError::InvalidStrategy("runs must be at least 1".into()));
        }
        if !(self.run_temperature >= 0.0) {
            return Err(PromptError::InvalidStrategy("run_temperature must be >= 0".into()));
        }
        Ok(())
    }
}

/// Interleaves valid and invalid examples by rank: v1, i1, v2, i2, ...
pub fn interleave<T: Clone>(valid: &[T], invalid: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(valid.len() + invalid.len());
    for i in 0..valid.len().max(invalid.len()) {
        out.extend(valid.get(i).cloned());
        out.extend(invalid.get(i).cloned());
    }
    out
}
