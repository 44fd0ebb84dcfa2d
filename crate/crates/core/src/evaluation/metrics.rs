use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::model::{ConfusionCounts, Label, PairKey};

/// Rounds half away from zero to `decimals` places. A tiny relative nudge
/// absorbs binary representation error so that e.g. 58.745 rounds up.
pub fn round_half_up(x: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    let scaled = x * scale;
    let nudged = scaled + scaled.abs().max(1.0) * 1e-12 * scaled.signum();
    nudged.round() / scale
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

fn f1(p: Option<f64>, r: Option<f64>) -> Option<f64> {
    let (p, r) = (p?, r?);
    Some(if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) })
}

/// Unrounded per-class metrics in percent, Valid as the positive class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawMetrics {
    pub accuracy: Option<f64>,
    pub valid_precision: Option<f64>,
    pub valid_recall: Option<f64>,
    pub valid_f1: Option<f64>,
    pub invalid_precision: Option<f64>,
    pub invalid_recall: Option<f64>,
    pub invalid_f1: Option<f64>,
    pub macro_f1: Option<f64>,
}

impl RawMetrics {
    pub fn from_confusion(c: &ConfusionCounts) -> Self {
        let vp = ratio(c.tp, c.tp + c.fp);
        let vr = ratio(c.tp, c.tp + c.fn_);
        let ip = ratio(c.tn, c.tn + c.fn_);
        let ir = ratio(c.tn, c.tn + c.fp);
        let (vf, if_) = (f1(vp, vr), f1(ip, ir));
        Self {
            accuracy: ratio(c.tp + c.tn, c.total()),
            valid_precision: vp,
            valid_recall: vr,
            valid_f1: vf,
            invalid_precision: ip,
            invalid_recall: ir,
            invalid_f1: if_,
            macro_f1: vf.zip(if_).map(|(a, b)| (a + b) / 2.0),
        }
    }
}

/// Unweighted mean of the two class F1 scores, rounded to 2 decimals.
pub fn macro_f1_of(valid_f1: f64, invalid_f1: f64) -> f64 {
    round_half_up((valid_f1 + invalid_f1) / 2.0, 2)
}

/// Classification metrics in percent, rounded half-up to 2 decimals.
/// Metrics with a zero denominator are `None` and named in `undefined`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub confusion: ConfusionCounts,
    pub accuracy: Option<f64>,
    pub valid_precision: Option<f64>,
    pub valid_recall: Option<f64>,
    pub valid_f1: Option<f64>,
    pub invalid_precision: Option<f64>,
    pub invalid_recall: Option<f64>,
    pub invalid_f1: Option<f64>,
    pub macro_f1: Option<f64>,
    pub undefined: BTreeSet<String>,
    /// Pairs that could not be judged and are not in `confusion`.
    #[serde(default)]
    pub skipped: u64,
}

impl MetricsReport {
    pub fn from_confusion(confusion: ConfusionCounts) -> Self {
        let raw = RawMetrics::from_confusion(&confusion);
        let mut undefined = BTreeSet::new();
        let mut field = |name: &str, v: Option<f64>| {
            if v.is_none() {
                undefined.insert(name.to_string());
            }
            v.map(|x| round_half_up(x, 2))
        };
        Self {
            accuracy: field("accuracy", raw.accuracy),
            valid_precision: field("valid_precision", raw.valid_precision),
            valid_recall: field("valid_recall", raw.valid_recall),
            valid_f1: field("valid_f1", raw.valid_f1),
            invalid_precision: field("invalid_precision", raw.invalid_precision),
            invalid_recall: field("invalid_recall", raw.invalid_recall),
            invalid_f1: field("invalid_f1", raw.invalid_f1),
            macro_f1: field("macro_f1", raw.macro_f1),
            undefined,
            confusion,
            skipped: 0,
        }
    }
}

/// Scores predictions against truth over the same pair set.
pub fn compute_metrics(
    predictions: &BTreeMap<PairKey, Label>,
    truth: &BTreeMap<PairKey, Label>,
) -> Result<MetricsReport, EvalError> {
    if predictions.len() != truth.len() || predictions.keys().any(|k| !truth.contains_key(k)) {
        let missing = truth.keys().find(|k| !predictions.contains_key(k));
        let extra = predictions.keys().find(|k| !truth.contains_key(k));
        return Err(EvalError::PairSetMismatch(match (missing, extra) {
            (Some(k), _) => format!("no prediction for {k}"),
            (_, Some(k)) => format!("no truth label for {k}"),
            _ => "pair sets differ".into(),
        }));
    }
    let c: ConfusionCounts = predictions.iter().map(|(k, p)| (*p, truth[k])).collect();
    Ok(MetricsReport::from_confusion(c))
}

/// Share of predicted links that reviewers confirmed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    /// Percent, rounded to 2 decimals; `None` when nothing was predicted.
    pub correctness: Option<f64>,
    pub confirmed: u64,
    pub predicted: u64,
}

pub fn compute_correctness(confirmed: u64, predicted: u64) -> Result<RecoveryReport, EvalError> {
    if confirmed > predicted {
        return Err(EvalError::InvalidInput(format!("confirmed {confirmed} exceeds predicted {predicted}")));
    }
    Ok(RecoveryReport { correctness: ratio(confirmed, predicted).map(|x| round_half_up(x, 2)), confirmed, predicted })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding() {
        assert_eq!(round_half_up(58.745, 2), 58.75);
        assert_eq!(round_half_up(66.666_666, 2), 66.67);
        assert_eq!(round_half_up(85.459_76, 2), 85.46);
        assert_eq!(round_half_up(1.005, 2), 1.01);
        assert_eq!(round_half_up(0.0, 2), 0.0);
    }

    #[test]
    fn hand_worked_counts() {
        let m = MetricsReport::from_confusion(ConfusionCounts { tp: 3, fp: 1, fn_: 1, tn: 1 });
        assert_eq!(m.accuracy, Some(66.67));
        assert_eq!(m.valid_precision, Some(75.0));
        assert_eq!(m.valid_recall, Some(75.0));
        assert_eq!(m.invalid_precision, Some(50.0));
        assert_eq!(m.invalid_f1, Some(50.0));
        assert_eq!(m.macro_f1, Some(62.5));
        assert!(m.undefined.is_empty());
    }

    #[test]
    fn undefined_is_flagged_not_zeroed() {
        let m = MetricsReport::from_confusion(ConfusionCounts { tp: 4, fp: 0, fn_: 0, tn: 0 });
        assert_eq!(m.accuracy, Some(100.0));
        assert_eq!(m.invalid_precision, None);
        assert_eq!(m.macro_f1, None);
        assert!(m.undefined.contains("invalid_recall") && m.undefined.contains("macro_f1"));
    }

    #[test]
    fn mismatch_and_perfect() {
        let k = |s: &str| PairKey::new(s, "t");
        let truth: BTreeMap<_, _> =
            [(k("a"), Label::Valid), (k("b"), Label::Valid), (k("c"), Label::Invalid), (k("d"), Label::Invalid)].into();
        let m = compute_metrics(&truth, &truth).unwrap();
        assert_eq!((m.accuracy, m.macro_f1), (Some(100.0), Some(100.0)));
        let mut p = truth.clone();
        p.remove(&k("a"));
        assert!(compute_metrics(&p, &truth).is_err());
    }

    #[test]
    fn correctness() {
        assert_eq!(compute_correctness(171, 200).unwrap().correctness, Some(85.5));
        assert_eq!(compute_correctness(0, 10).unwrap().correctness, Some(0.0));
        assert_eq!(compute_correctness(429, 502).unwrap().correctness, Some(85.46));
        assert_eq!(compute_correctness(0, 0).unwrap().correctness, None);
        assert!(compute_correctness(3, 2).is_err());
    }
}
