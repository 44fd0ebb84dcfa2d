use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{EvalError, MetricsReport};
use crate::corpus::Corpus;
use crate::model::{ConfusionCounts, Label, LabeledExample, PairKey, Variation};
use crate::pipeline::{ValidationQuery, VerdictFn};
use crate::recovery::SkippedPair;

/// One leave-one-out evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub example_id: String,
    pub key: PairKey,
    pub variation: Variation,
    pub truth: Label,
    /// `None` when the verdict failed.
    pub predicted: Option<Label>,
    pub retrieved_example_ids: Vec<String>,
    /// Labeled examples available to this trial.
    pub database_size: usize,
    pub variation_excluded: Option<Variation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoocvReport {
    pub metrics: MetricsReport,
    pub trials: Vec<Trial>,
    pub skipped: Vec<SkippedPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub per_variation: BTreeMap<Variation, MetricsReport>,
    pub pooled: MetricsReport,
    pub trials: Vec<Trial>,
    pub skipped: Vec<SkippedPair>,
}

fn run_trials(examples: &[LabeledExample], verdict_fn: &dyn VerdictFn, exclude_variation: bool) -> Vec<(Trial, Option<String>)> {
    let n = examples.len();
    examples
        .par_iter()
        .map(|e| {
            let mut q = ValidationQuery::new(&e.stakeholder, &e.system).excluding(&e.example_id);
            let variation_excluded = exclude_variation.then_some(e.stakeholder.variation);
            q.variation_exclusion = variation_excluded;
            let database_size = match variation_excluded {
                Some(v) => examples.iter().filter(|o| o.stakeholder.variation != v).count(),
                None => n - 1,
            };
            let (predicted, retrieved, error) = match verdict_fn.verdict(&q) {
                Ok(v) => (Some(Label::from(v.decision)), v.retrieved_example_ids.unwrap_or_default(), None),
                Err(err) => (None, Vec::new(), Some(err.to_string())),
            };
            let trial = Trial {
                example_id: e.example_id.clone(),
                key: e.key(),
                variation: e.stakeholder.variation,
                truth: e.label,
                predicted,
                retrieved_example_ids: retrieved,
                database_size,
                variation_excluded,
            };
            (trial, error)
        })
        .collect()
}

fn confusion<'a>(trials: impl Iterator<Item = &'a Trial>) -> (ConfusionCounts, u64) {
    let mut c = ConfusionCounts::default();
    let mut skipped = 0;
    for t in trials {
        match t.predicted {
            Some(p) => c.record(p, t.truth),
            None => skipped += 1,
        }
    }
    (c, skipped)
}

fn report_of<'a>(trials: impl Iterator<Item = &'a Trial>) -> MetricsReport {
    let (c, skipped) = confusion(trials);
    MetricsReport { skipped, ..MetricsReport::from_confusion(c) }
}

fn split(results: Vec<(Trial, Option<String>)>) -> (Vec<Trial>, Vec<SkippedPair>) {
    let mut skipped = Vec::new();
    let trials = results
        .into_iter()
        .map(|(t, err)| {
            if let Some(reason) = err {
                skipped.push(SkippedPair { key: t.key.clone(), reason });
            }
            t
        })
        .collect();
    (trials, skipped)
}

/// Leave-one-out over the labeled links: each link is judged against a
/// database made of all the others.
pub fn run_loocv(corpus: &Corpus, verdict_fn: &dyn VerdictFn) -> Result<LoocvReport, EvalError> {
    let examples = corpus.labeled_examples();
    if examples.len() < 2 {
        return Err(EvalError::Precondition(format!("LOOCV needs at least 2 labeled links, found {}", examples.len())));
    }
    let (trials, skipped) = split(run_trials(&examples, verdict_fn, false));
    Ok(LoocvReport { metrics: report_of(trials.iter()), trials, skipped })
}

/// Leave-one-out where retrieval also drops every example of the test
/// pair's variation. Reports per variation plus a pooled row.
pub fn run_robustness(corpus: &Corpus, verdict_fn: &dyn VerdictFn) -> Result<RobustnessReport, EvalError> {
    let examples = corpus.labeled_examples();
    let mut variations: Vec<Variation> = examples.iter().map(|e| e.stakeholder.variation).collect();
    variations.sort();
    variations.dedup();
    if variations.len() < 2 {
        return Err(EvalError::Precondition(format!(
            "robustness needs at least 2 variation classes among labeled links, found {}",
            variations.len()
        )));
    }
    let (trials, skipped) = split(run_trials(&examples, verdict_fn, true));
    let per_variation = variations
        .iter()
        .map(|v| (*v, report_of(trials.iter().filter(|t| t.variation == *v))))
        .collect();
    Ok(RobustnessReport { per_variation, pooled: report_of(trials.iter()), trials, skipped })
}
