//! Shared domain vocabulary: requirements, links, labels, verdicts and
//! confusion counts.
//!
//! Everything here is a plain value type. Classification of raw text into
//! these types lives in [`crate::corpus`].

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Set of message / signal identifiers extracted from requirement text.
pub type MessageSet = BTreeSet<String>;

/// Template family a stakeholder requirement was written in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variation {
    V1,
    V2,
    V3,
    V4,
    Unknown,
}

impl Variation {
    pub const KNOWN: [Variation; 4] = [Variation::V1, Variation::V2, Variation::V3, Variation::V4];

    /// DTC type forced by the variation.
    pub fn dtc_type(self) -> DtcType {
        match self {
            Variation::V1 => DtcType::LostCommunication,
            Variation::V2 | Variation::V3 | Variation::V4 => DtcType::ImplausibleData,
            Variation::Unknown => DtcType::Unknown,
        }
    }

    /// Condition kind forced by the variation: V1..V3 set the DTC, V4 clears it.
    pub fn condition_kind(self) -> ConditionKind {
        match self {
            Variation::V1 | Variation::V2 | Variation::V3 => ConditionKind::Mature,
            Variation::V4 => ConditionKind::Demature,
            Variation::Unknown => ConditionKind::Unknown,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variation::V1 => "V1",
            Variation::V2 => "V2",
            Variation::V3 => "V3",
            Variation::V4 => "V4",
            Variation::Unknown => "Unknown",
        }
    }
}

impl fmt::Display for Variation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "V1" | "1" => Ok(Variation::V1),
            "V2" | "2" => Ok(Variation::V2),
            "V3" | "3" => Ok(Variation::V3),
            "V4" | "4" => Ok(Variation::V4),
            "UNKNOWN" => Ok(Variation::Unknown),
            other => Err(format!("unknown variation `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DtcType {
    LostCommunication,
    ImplausibleData,
    Unknown,
}

/// Whether a condition sets (Mature) or clears (Demature) a DTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConditionKind {
    Mature,
    Demature,
    Unknown,
}

impl fmt::Display for ConditionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConditionKind::Mature => "Mature",
            ConditionKind::Demature => "Demature",
            ConditionKind::Unknown => "Unknown",
        };
        f.write_str(s)
    }
}

/// One atomic stakeholder requirement with its classification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StakeholderRequirement {
    pub id: String,
    pub text: String,
    pub variation: Variation,
    pub dtc_type: DtcType,
    pub condition_kind: ConditionKind,
    /// DTC state named by the action line (`"Present"` sets, `"Not Present"`
    /// clears). Independent of `condition_kind`; used to stratify few-shot
    /// examples.
    pub action_slot: ConditionKind,
    pub messages: MessageSet,
}

impl StakeholderRequirement {
    /// True when `dtc_type` and `condition_kind` agree with the variation mapping.
    pub fn is_consistent(&self) -> bool {
        self.variation == Variation::Unknown
            || (self.dtc_type == self.variation.dtc_type()
                && self.condition_kind == self.variation.condition_kind())
    }
}

/// A system requirement reduced to its Mature / Demature condition blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemRequirement {
    pub id: String,
    pub name: String,
    pub dtc_type: DtcType,
    pub mature_text: String,
    pub demature_text: String,
    pub mature_messages: MessageSet,
    pub demature_messages: MessageSet,
}

impl SystemRequirement {
    /// Condition text for one side. `Unknown` has no side.
    pub fn side_text(&self, kind: ConditionKind) -> Option<&str> {
        match kind {
            ConditionKind::Mature => Some(&self.mature_text),
            ConditionKind::Demature => Some(&self.demature_text),
            ConditionKind::Unknown => None,
        }
    }

    pub fn side_messages(&self, kind: ConditionKind) -> Option<&MessageSet> {
        match kind {
            ConditionKind::Mature => Some(&self.mature_messages),
            ConditionKind::Demature => Some(&self.demature_messages),
            ConditionKind::Unknown => None,
        }
    }

    /// Both condition blocks joined by a single space.
    pub fn condition_text(&self) -> String {
        normalize_requirement_text(&format!("{} {}", self.mature_text, self.demature_text))
    }
}

/// Binary validity label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Valid,
    Invalid,
}

impl Label {
    pub fn flipped(self) -> Label {
        match self {
            Label::Valid => Label::Invalid,
            Label::Invalid => Label::Valid,
        }
    }
}

impl From<Decision> for Label {
    fn from(d: Decision) -> Self {
        match d {
            Decision::Yes => Label::Valid,
            Decision::No => Label::Invalid,
        }
    }
}

/// Label carried by a trace link; `Unlabeled` only for links nobody has
/// adjudicated yet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkLabel {
    Valid,
    Invalid,
    Unlabeled,
}

impl LinkLabel {
    pub fn binary(self) -> Option<Label> {
        match self {
            LinkLabel::Valid => Some(Label::Valid),
            LinkLabel::Invalid => Some(Label::Invalid),
            LinkLabel::Unlabeled => None,
        }
    }
}

impl From<Label> for LinkLabel {
    fn from(l: Label) -> Self {
        match l {
            Label::Valid => LinkLabel::Valid,
            Label::Invalid => LinkLabel::Invalid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Engineer,
    Annotator,
    Model,
    HumanReview,
}

/// (stakeholder id, system id) pair.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PairKey {
    pub stake_id: String,
    pub sys_id: String,
}

impl PairKey {
    pub fn new(stake_id: impl Into<String>, sys_id: impl Into<String>) -> Self {
        Self { stake_id: stake_id.into(), sys_id: sys_id.into() }
    }
}

impl fmt::Display for PairKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.stake_id, self.sys_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceLink {
    pub stake_id: String,
    pub sys_id: String,
    pub label: LinkLabel,
    pub provenance: Provenance,
}

impl TraceLink {
    pub fn key(&self) -> PairKey {
        PairKey::new(self.stake_id.clone(), self.sys_id.clone())
    }
}

/// A labeled (stakeholder, system) pair stored in the retrieval database.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub example_id: String,
    pub stakeholder: StakeholderRequirement,
    pub system: SystemRequirement,
    pub label: Label,
}

impl LabeledExample {
    pub fn key(&self) -> PairKey {
        PairKey::new(self.stakeholder.id.clone(), self.system.id.clone())
    }
}

/// Model decision for a single pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    Yes,
    No,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Yes => "Yes",
            Decision::No => "No",
        })
    }
}

/// Prompting strategy family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StrategyKind {
    ZeroShot,
    CoT,
    FewShot16,
    SelfConsistency,
    #[serde(rename = "RAG")]
    Rag,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::ZeroShot,
        StrategyKind::CoT,
        StrategyKind::FewShot16,
        StrategyKind::SelfConsistency,
        StrategyKind::Rag,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::ZeroShot => "zero-shot",
            StrategyKind::CoT => "cot",
            StrategyKind::FewShot16 => "few-shot-16",
            StrategyKind::SelfConsistency => "self-consistency",
            StrategyKind::Rag => "rag",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "zeroshot" => Ok(StrategyKind::ZeroShot),
            "cot" => Ok(StrategyKind::CoT),
            "fewshot16" | "fewshot" => Ok(StrategyKind::FewShot16),
            "selfconsistency" | "sc" => Ok(StrategyKind::SelfConsistency),
            "rag" => Ok(StrategyKind::Rag),
            _ => Err(format!("unknown strategy `{s}`")),
        }
    }
}

/// Self-consistency tally. `yes + no + ambiguous` equals the configured run count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteTally {
    pub yes: u32,
    pub no: u32,
    #[serde(default)]
    pub ambiguous: u32,
}

impl VoteTally {
    pub fn runs(&self) -> u32 {
        self.yes + self.no + self.ambiguous
    }

    /// Fraction of all runs that voted Yes.
    pub fn yes_share(&self) -> f64 {
        match self.runs() {
            0 => 0.0,
            n => f64::from(self.yes) / f64::from(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub decision: Decision,
    pub raw_response: String,
    pub explanation: Option<String>,
    pub strategy: StrategyKind,
    pub votes: Option<VoteTally>,
    pub retrieved_example_ids: Option<Vec<String>>,
}

impl Verdict {
    /// Yes-share of the votes, or 1.0 / 0.0 for single-shot strategies.
    pub fn vote_share(&self) -> f64 {
        match self.votes {
            Some(t) => t.yes_share(),
            None if self.decision == Decision::Yes => 1.0,
            None => 0.0,
        }
    }
}

/// True/false positive/negative counts with Valid as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn record(&mut self, predicted: Label, truth: Label) {
        match (predicted, truth) {
            (Label::Valid, Label::Valid) => self.tp += 1,
            (Label::Valid, Label::Invalid) => self.fp += 1,
            (Label::Invalid, Label::Valid) => self.fn_ += 1,
            (Label::Invalid, Label::Invalid) => self.tn += 1,
        }
    }

    /// Counts with Invalid as the positive class.
    pub fn swapped(&self) -> ConfusionCounts {
        ConfusionCounts { tp: self.tn, fp: self.fn_, fn_: self.fp, tn: self.tp }
    }

    pub fn merge(&self, other: &ConfusionCounts) -> ConfusionCounts {
        ConfusionCounts {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
            tn: self.tn + other.tn,
        }
    }
}

impl FromIterator<(Label, Label)> for ConfusionCounts {
    fn from_iter<I: IntoIterator<Item = (Label, Label)>>(iter: I) -> Self {
        let mut c = ConfusionCounts::default();
        for (p, t) in iter {
            c.record(p, t);
        }
        c
    }
}

/// Trims and collapses interior whitespace runs to single spaces.
pub fn normalize_requirement_text(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}
