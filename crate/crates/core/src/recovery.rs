//! Missing-link recovery: candidate enumeration, the rule-based prefilter
//! and validation of the survivors.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, MessageExtractor};
use crate::model::{ConditionKind, DtcType, MessageSet, PairKey, Verdict};
use crate::pipeline::{ValidationQuery, VerdictFn};

pub const DROP_DTC_UNKNOWN: &str = "dtc_unknown";
pub const DROP_DTC_MISMATCH: &str = "dtc_mismatch";
pub const DROP_CONDITION_UNKNOWN: &str = "condition_unknown";
pub const DROP_NO_SHARED_MESSAGE: &str = "no_shared_message";

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FunnelReport {
    pub total_candidates: u64,
    pub after_stage1: u64,
    pub after_stage2: u64,
    pub after_stage3: u64,
    pub predicted_valid: u64,
    #[serde(default)]
    pub skipped: u64,
    pub drop_reasons: BTreeMap<String, u64>,
}

impl FunnelReport {
    pub fn is_monotone(&self) -> bool {
        self.total_candidates >= self.after_stage1
            && self.after_stage1 >= self.after_stage2
            && self.after_stage2 >= self.after_stage3
            && self.after_stage3 >= self.predicted_valid
    }
}

/// A pair that passed all three stages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Survivor {
    pub key: PairKey,
    pub condition_side: ConditionKind,
    /// Stakeholder messages found on the bound side.
    pub shared_messages: MessageSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveredLink {
    pub stake_id: String,
    pub sys_id: String,
    pub verdict: Verdict,
    pub condition_side: ConditionKind,
    #[serde(default)]
    pub shared_messages: MessageSet,
}

impl RecoveredLink {
    pub fn key(&self) -> PairKey {
        PairKey::new(&self.stake_id, &self.sys_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedPair {
    pub key: PairKey,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct PrefilterOptions {
    /// Leave the stakeholder's trigger clause out of Stage 3.
    pub mask_trigger: bool,
    pub extractor: MessageExtractor,
}

impl Default for PrefilterOptions {
    fn default() -> Self {
        Self { mask_trigger: true, extractor: MessageExtractor::default() }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RecoveryOutcome {
    pub recovered: Vec<RecoveredLink>,
    pub funnel: FunnelReport,
    pub skipped: Vec<SkippedPair>,
}

/// Every stakeholder × system pair without a recorded link, ordered by
/// (stake_id, sys_id).
pub fn enumerate_candidates(corpus: &Corpus) -> Vec<PairKey> {
    let linked = corpus.linked_pairs();
    let mut out: Vec<PairKey> = corpus
        .stakeholders()
        .iter()
        .flat_map(|s| corpus.systems().iter().map(move |t| PairKey::new(&s.id, &t.id)))
        .filter(|k| !linked.contains(k))
        .collect();
    out.sort();
    out
}

enum Stage {
    Drop1(&'static str),
    Drop2,
    Drop3,
    Keep(Survivor),
}

fn judge(key: &PairKey, corpus: &Corpus, options: &PrefilterOptions) -> Stage {
    let (Some(s), Some(sys)) = (corpus.stakeholder(&key.stake_id), corpus.system(&key.sys_id)) else {
        return Stage::Drop1(DROP_DTC_UNKNOWN);
    };
    if s.dtc_type == DtcType::Unknown || sys.dtc_type == DtcType::Unknown {
        return Stage::Drop1(DROP_DTC_UNKNOWN);
    }
    if s.dtc_type != sys.dtc_type {
        return Stage::Drop1(DROP_DTC_MISMATCH);
    }
    let Some(side) = sys.side_messages(s.condition_kind) else {
        return Stage::Drop2;
    };
    let stake_messages = if options.mask_trigger {
        s.messages.clone()
    } else {
        options.extractor.clone().mask_trigger(false).extract(&s.text)
    };
    let shared: MessageSet = stake_messages.intersection(side).cloned().collect();
    if shared.is_empty() {
        return Stage::Drop3;
    }
    Stage::Keep(Survivor { key: key.clone(), condition_side: s.condition_kind, shared_messages: shared })
}

/// Runs the three stages: same DTC type, bind to the matching condition
/// side, share at least one message with that side.
pub fn apply_prefilter(candidates: &[PairKey], corpus: &Corpus, options: &PrefilterOptions) -> (Vec<Survivor>, FunnelReport) {
    let stages: Vec<Stage> = candidates.par_iter().map(|k| judge(k, corpus, options)).collect();
    let mut report = FunnelReport { total_candidates: candidates.len() as u64, ..Default::default() };
    let mut survivors = Vec::new();
    let mut bump = |r: &str| *report.drop_reasons.entry(r.to_string()).or_insert(0) += 1;
    let (mut s1, mut s2, mut s3) = (0u64, 0u64, 0u64);
    for stage in stages {
        match stage {
            Stage::Drop1(reason) => bump(reason),
            Stage::Drop2 => {
                s1 += 1;
                bump(DROP_CONDITION_UNKNOWN);
            }
            Stage::Drop3 => {
                s1 += 1;
                s2 += 1;
                bump(DROP_NO_SHARED_MESSAGE);
            }
            Stage::Keep(sv) => {
                s1 += 1;
                s2 += 1;
                s3 += 1;
                survivors.push(sv);
            }
        }
    }
    report.after_stage1 = s1;
    report.after_stage2 = s2;
    report.after_stage3 = s3;
    (survivors, report)
}

/// Prefilters all candidates and asks `verdict_fn` about each survivor.
/// Pairs whose verdict fails are listed as skipped, never counted as No.
pub fn recover_links(corpus: &Corpus, verdict_fn: &dyn VerdictFn, options: &PrefilterOptions) -> RecoveryOutcome {
    recover_links_with_progress(corpus, verdict_fn, options, |_, _| {})
}

/// As [`recover_links`], calling `progress(done, total)` after each survivor.
pub fn recover_links_with_progress(
    corpus: &Corpus,
    verdict_fn: &dyn VerdictFn,
    options: &PrefilterOptions,
    progress: impl Fn(usize, usize) + Send + Sync,
) -> RecoveryOutcome {
    let candidates = enumerate_candidates(corpus);
    let (survivors, mut funnel) = apply_prefilter(&candidates, corpus, options);
    let total = survivors.len();
    let done = std::sync::atomic::AtomicUsize::new(0);
    let results: Vec<(Survivor, Result<Verdict, String>)> = survivors
        .into_par_iter()
        .map(|sv| {
            let s = corpus.stakeholder(&sv.key.stake_id).expect("survivor ids exist");
            let sys = corpus.system(&sv.key.sys_id).expect("survivor ids exist");
            let r = verdict_fn.verdict(&ValidationQuery::new(s, sys)).map_err(|e| e.to_string());
            progress(done.fetch_add(1, std::sync::atomic::Ordering::SeqCst) + 1, total);
            (sv, r)
        })
        .collect();

    let linked: HashSet<PairKey> = corpus.linked_pairs();
    let mut outcome = RecoveryOutcome::default();
    for (sv, r) in results {
        match r {
            Ok(v) if v.decision == crate::model::Decision::Yes && !linked.contains(&sv.key) => {
                outcome.recovered.push(RecoveredLink {
                    stake_id: sv.key.stake_id,
                    sys_id: sv.key.sys_id,
                    verdict: v,
                    condition_side: sv.condition_side,
                    shared_messages: sv.shared_messages,
                })
            }
            Ok(_) => {}
            Err(reason) => outcome.skipped.push(SkippedPair { key: sv.key, reason }),
        }
    }
    funnel.predicted_valid = outcome.recovered.len() as u64;
    funnel.skipped = outcome.skipped.len() as u64;
    outcome.funnel = funnel;
    outcome
}

/// One line of a recovery output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum RecoveryRecord {
    Recovered(RecoveredLink),
    Skipped(SkippedPair),
    Funnel(FunnelReport),
}

pub fn write_recovery(outcome: &RecoveryOutcome, path: &Path) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let mut line = |r: RecoveryRecord| -> std::io::Result<()> {
        serde_json::to_writer(&mut w, &r)?;
        w.write_all(b"\n")
    };
    for r in &outcome.recovered {
        line(RecoveryRecord::Recovered(r.clone()))?;
    }
    for s in &outcome.skipped {
        line(RecoveryRecord::Skipped(s.clone()))?;
    }
    line(RecoveryRecord::Funnel(outcome.funnel.clone()))?;
    w.flush()
}

pub fn read_recovery(path: &Path) -> std::io::Result<RecoveryOutcome> {
    let mut out = RecoveryOutcome::default();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RecoveryRecord = serde_json::from_str(&line).map_err(|e| {
            std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{}:{}: {e}", path.display(), i + 1))
        })?;
        match rec {
            RecoveryRecord::Recovered(r) => out.recovered.push(r),
            RecoveryRecord::Skipped(s) => out.skipped.push(s),
            RecoveryRecord::Funnel(f) => out.funnel = f,
        }
    }
    Ok(out)
}
