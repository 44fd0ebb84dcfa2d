use serde::{Deserialize, Serialize};

use super::{EvalError, RawMetrics, TfidfModel};
use crate::model::{ConfusionCounts, Label, LabeledExample};
use crate::prompting::{render_stakeholder, render_system};
use crate::retrieval::cosine_similarity;

pub const SWEEP_STEPS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: f64,
    /// Unrounded macro-F1 in percent; `None` where a class F1 is undefined.
    pub macro_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub best_threshold: f64,
    pub best_macro_f1: Option<f64>,
    pub curve: Vec<SweepPoint>,
}

/// Macro-F1 differences (in percent) below this are ties.
const TIE_EPS: f64 = 1e-9;

/// The `i`-th threshold, `i / 1000`.
pub fn sweep_threshold(i: usize) -> f64 {
    i as f64 / SWEEP_STEPS as f64
}

/// Tries every threshold in {0.000, 0.001, ..., 1.000}, predicting Valid
/// when similarity ≥ threshold. Similarities are clamped to [0, 1]. The
/// best threshold maximizes macro-F1; ties go to the smallest threshold.
pub fn threshold_sweep(similarities: &[f64], truth: &[Label]) -> Result<SweepResult, EvalError> {
    if similarities.is_empty() {
        return Err(EvalError::InvalidInput("threshold sweep needs at least one pair".into()));
    }
    if similarities.len() != truth.len() {
        return Err(EvalError::PairSetMismatch(format!(
            "{} similarities but {} labels",
            similarities.len(),
            truth.len()
        )));
    }
    if let Some(i) = similarities.iter().position(|s| !s.is_finite()) {
        return Err(EvalError::InvalidInput(format!("similarity {i} is not finite")));
    }
    let clamped: Vec<f64> = similarities.iter().map(|s| s.clamp(0.0, 1.0)).collect();
    let curve: Vec<SweepPoint> = (0..=SWEEP_STEPS)
        .map(|i| {
            let t = sweep_threshold(i);
            let c: ConfusionCounts = clamped
                .iter()
                .zip(truth)
                .map(|(s, l)| (if *s >= t { Label::Valid } else { Label::Invalid }, *l))
                .collect();
            SweepPoint { threshold: t, macro_f1: RawMetrics::from_confusion(&c).macro_f1 }
        })
        .collect();
    let mut best: Option<SweepPoint> = None;
    for p in &curve {
        if let Some(m) = p.macro_f1 {
            // equal F1 values reached through different confusions can differ
            // in the last bits; those are ties and keep the smaller threshold
            if best.and_then(|b| b.macro_f1).is_none_or(|b| m > b + TIE_EPS) {
                best = Some(*p);
            }
        }
    }
    let best = best.unwrap_or(curve[0]);
    Ok(SweepResult { best_threshold: best.threshold, best_macro_f1: best.macro_f1, curve })
}

/// Cosine similarity of each example's stakeholder text and system text
/// under a tf-idf model fit on all of those texts.
pub fn tfidf_pair_similarities(examples: &[LabeledExample]) -> Result<Vec<f64>, EvalError> {
    let stake: Vec<String> = examples.iter().map(|e| render_stakeholder(&e.stakeholder)).collect();
    let sys: Vec<String> = examples.iter().map(|e| render_system(&e.system)).collect();
    let docs: Vec<&String> = stake.iter().chain(&sys).collect();
    let model = TfidfModel::fit(&docs)?;
    Ok(stake
        .iter()
        .zip(&sys)
        .map(|(a, b)| cosine_similarity(&model.transform(a), &model.transform(b)).unwrap_or(0.0))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable() {
        let sims = [0.9, 0.8, 0.3, 0.2];
        let labels = [Label::Valid, Label::Valid, Label::Invalid, Label::Invalid];
        let r = threshold_sweep(&sims, &labels).unwrap();
        assert_eq!(r.curve.len(), 1001);
        assert_eq!(r.best_macro_f1, Some(100.0));
        assert_eq!(r.best_threshold, 0.301);
    }

    #[test]
    fn single_class_is_undefined_at_low_thresholds() {
        let r = threshold_sweep(&[0.5, 0.7], &[Label::Valid, Label::Valid]).unwrap();
        assert_eq!(r.curve[0].macro_f1, None);
        assert!(r.curve.iter().all(|p| p.macro_f1.is_none()));
        assert_eq!(r.best_macro_f1, None);
    }

    #[test]
    fn bad_input() {
        assert!(threshold_sweep(&[], &[]).is_err());
        assert!(threshold_sweep(&[0.1], &[]).is_err());
        assert!(threshold_sweep(&[f64::NAN], &[Label::Valid]).is_err());
    }
}
