//! Seeded synthetic corpora with known ground truth.
//!
//! Every stakeholder gets one key token (a message name for V1/V3, a signal
//! name for V2/V4) and one of three fates: covered by a home system (Valid),
//! linked to a system that does not cover it (Invalid), or orphaned. Ground
//! truth Valid pairs are exactly the same-type pairs whose bound condition
//! side contains every stakeholder message; a fraction of them is withheld
//! from the recorded links so recovery has something to find.

use std::collections::BTreeMap;

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::templates::{condition_block, demature_clause, mature_clause, negated_mature_clause, stakeholder_text};
use super::{build_system, classify_stakeholder, Corpus, CorpusError, MessageExtractor};
use crate::model::{
    ConditionKind, DtcType, Label, LinkLabel, PairKey, Provenance, StakeholderRequirement, SystemRequirement,
    TraceLink, Variation,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisConfig {
    pub n_stakeholders: usize,
    pub n_systems: usize,
    /// Probability a stakeholder is covered by (and validly linked to) a home system.
    pub valid_link_rate: f64,
    /// Probability a stakeholder carries one recorded Invalid link instead.
    pub invalid_link_rate: f64,
    /// Share of ground-truth Valid pairs left out of the recorded links.
    pub withheld_rate: f64,
    /// Relative weights of V1..V4.
    pub variation_mix: [f64; 4],
    pub message_vocabulary_size: usize,
    pub random_seed: u64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            n_stakeholders: 200,
            n_systems: 8,
            valid_link_rate: 0.7,
            invalid_link_rate: 0.2,
            withheld_rate: 0.15,
            variation_mix: [1.0, 1.0, 1.0, 1.0],
            message_vocabulary_size: 400,
            random_seed: 7,
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |m: &str| Err(CorpusError::InvalidConfig(m.to_string()));
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if self.n_stakeholders == 0 || self.n_systems == 0 {
            return bad("need at least one stakeholder and one system");
        }
        if !unit(self.valid_link_rate) || !unit(self.invalid_link_rate) || !unit(self.withheld_rate) {
            return bad("rates must lie in [0, 1]");
        }
        if self.valid_link_rate + self.invalid_link_rate > 1.0 + 1e-12 {
            return bad("valid_link_rate + invalid_link_rate exceeds 1");
        }
        if self.variation_mix.iter().any(|w| !w.is_finite() || *w < 0.0) || self.variation_mix.iter().sum::<f64>() <= 0.0 {
            return bad("variation_mix weights must be non-negative and not all zero");
        }
        if self.message_vocabulary_size == 0 {
            return bad("message_vocabulary_size must be positive");
        }
        Ok(())
    }
}

/// Generated corpus plus its full labeled ground truth (recorded links and
/// withheld Valid pairs).
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    pub ground_truth: Vec<TraceLink>,
}

impl SyntheticCorpus {
    /// Ground-truth Valid pairs absent from the recorded links.
    pub fn withheld_valid(&self) -> Vec<PairKey> {
        let linked = self.corpus.linked_pairs();
        self.ground_truth
            .iter()
            .filter(|l| l.label == LinkLabel::Valid && !linked.contains(&l.key()))
            .map(TraceLink::key)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fate {
    Valid,
    Invalid,
    Orphan,
}

struct Draft {
    variation: Variation,
    key: String,
    fate: Fate,
    home: Option<usize>,
    pinned: bool,
}

/// Cycles through a shuffled pool, reshuffling once exhausted.
struct TokenPool {
    prefix: &'static str,
    order: Vec<usize>,
    next: usize,
}

impl TokenPool {
    fn new(prefix: &'static str, size: usize) -> Self {
        Self { prefix, order: (1..=size).collect(), next: size }
    }

    fn draw(&mut self, rng: &mut ChaCha8Rng) -> String {
        if self.next >= self.order.len() {
            self.order.shuffle(rng);
            self.next = 0;
        }
        let i = self.order[self.next];
        self.next += 1;
        format!("{}_{i}", self.prefix)
    }
}

pub fn generate_synthetic_corpus(config: &SynthesisConfig) -> Result<SyntheticCorpus, CorpusError> {
    config.validate()?;
    let extractor = MessageExtractor::default();
    let mut rng = ChaCha8Rng::seed_from_u64(config.random_seed);

    let [w1, w2, w3, w4] = config.variation_mix;
    let rest = w2 + w3 + w4;
    let n = config.n_systems;
    let n_lc = if w1 == 0.0 {
        0
    } else if rest == 0.0 {
        n
    } else {
        if n < 2 {
            return Err(CorpusError::Infeasible("both DTC types requested but only one system".into()));
        }
        ((n as f64 * w1 / (w1 + rest)).round() as usize).clamp(1, n - 1)
    };
    let sys_dtc: Vec<DtcType> = (0..n)
        .map(|i| if i < n_lc { DtcType::LostCommunication } else { DtcType::ImplausibleData })
        .collect();
    let systems_of = |dtc: DtcType| -> Vec<usize> { (0..n).filter(|&i| sys_dtc[i] == dtc).collect() };
    let lc_systems = systems_of(DtcType::LostCommunication);
    let id_systems = systems_of(DtcType::ImplausibleData);

    // Stratified head: one stakeholder per (variation, slot, fate) cell that
    // the weights and rates allow, so all few-shot cells exist.
    let mut cells = Vec::new();
    for (vi, v) in Variation::KNOWN.iter().enumerate() {
        if config.variation_mix[vi] <= 0.0 {
            continue;
        }
        for slot in [ConditionKind::Mature, ConditionKind::Demature] {
            for (fate, rate) in [(Fate::Valid, config.valid_link_rate), (Fate::Invalid, config.invalid_link_rate)] {
                if rate > 0.0 {
                    cells.push((*v, slot, fate));
                }
            }
        }
    }

    let weights = WeightedIndex::new(config.variation_mix).map_err(|e| CorpusError::InvalidConfig(e.to_string()))?;
    let mut messages = TokenPool::new("MESSAGE", config.message_vocabulary_size);
    let mut signals = TokenPool::new("SIGNAL", config.message_vocabulary_size);

    let mut drafts = Vec::with_capacity(config.n_stakeholders);
    let mut slots = Vec::with_capacity(config.n_stakeholders);
    for i in 0..config.n_stakeholders {
        let (variation, slot, fate, pinned) = match cells.get(i) {
            Some(&(v, s, f)) => (v, s, f, true),
            None => {
                let v = Variation::KNOWN[weights.sample(&mut rng)];
                let s = if rng.gen_bool(0.5) { ConditionKind::Mature } else { ConditionKind::Demature };
                let u: f64 = rng.gen();
                let f = if u < config.valid_link_rate {
                    Fate::Valid
                } else if u < config.valid_link_rate + config.invalid_link_rate {
                    Fate::Invalid
                } else {
                    Fate::Orphan
                };
                (v, s, f, false)
            }
        };
        let key = match variation {
            Variation::V1 | Variation::V3 => messages.draw(&mut rng),
            _ => signals.draw(&mut rng),
        };
        let home_pool = if variation == Variation::V1 { &lc_systems } else { &id_systems };
        if home_pool.is_empty() {
            return Err(CorpusError::Infeasible(format!("no system of the DTC type required by {variation}")));
        }
        let home = (fate == Fate::Valid).then(|| home_pool[rng.gen_range(0..home_pool.len())]);
        drafts.push(Draft { variation, key, fate, home, pinned });
        slots.push(slot);
    }

    // Condition clauses per system side.
    let mut mature: Vec<Vec<String>> = vec![Vec::new(); n];
    let mut demature: Vec<Vec<String>> = vec![Vec::new(); n];
    for d in &drafts {
        let Some(h) = d.home else { continue };
        match d.variation {
            Variation::V4 => demature[h].push(demature_clause(&d.key)),
            v => {
                mature[h].push(mature_clause(v, &d.key));
                demature[h].push(negated_mature_clause(v, &d.key));
            }
        }
    }
    let systems: Vec<SystemRequirement> = (0..n)
        .map(|i| {
            let dtc = sys_dtc[i];
            let filler = |kind| match (dtc, kind) {
                (DtcType::LostCommunication, ConditionKind::Mature) => format!("Missing_Msg_HEARTBEAT_{}", i + 1),
                (DtcType::LostCommunication, _) => format!("!Missing_Msg_HEARTBEAT_{}", i + 1),
                (_, ConditionKind::Mature) => format!("Plausibility_Fault_HEARTBEAT_{}", i + 1),
                (_, _) => format!("!Plausibility_Fault_HEARTBEAT_{}", i + 1),
            };
            let side = |clauses: &Vec<String>, kind| {
                if clauses.is_empty() {
                    condition_block(dtc, kind, &[filler(kind)])
                } else {
                    condition_block(dtc, kind, clauses)
                }
            };
            let name = match dtc {
                DtcType::LostCommunication => format!("LostComm_Module_{}", i + 1),
                _ => format!("Implausible_Module_{}", i + 1),
            };
            build_system(
                format!("SYS-{:03}", i + 1),
                name,
                &side(&mature[i], ConditionKind::Mature),
                &side(&demature[i], ConditionKind::Demature),
                &extractor,
            )
        })
        .collect();

    let stakeholders: Vec<StakeholderRequirement> = drafts
        .iter()
        .zip(&slots)
        .enumerate()
        .map(|(i, (d, slot))| {
            let text = stakeholder_text(d.variation, &d.key, *slot);
            classify_stakeholder(format!("STK-{:04}", i + 1), &text, None, &extractor)
        })
        .collect();

    let covers = |s: &StakeholderRequirement, sys: &SystemRequirement| {
        s.dtc_type == sys.dtc_type
            && !s.messages.is_empty()
            && sys.side_messages(s.condition_kind).is_some_and(|m| s.messages.is_subset(m))
    };

    // Ground truth Valid set, by the coverage rule.
    let mut truth: BTreeMap<PairKey, Label> = BTreeMap::new();
    for s in &stakeholders {
        for sys in &systems {
            if covers(s, sys) {
                truth.insert(PairKey::new(&s.id, &sys.id), Label::Valid);
            }
        }
    }

    let mut links = Vec::new();
    let mut ground_truth = Vec::new();
    for (s, d) in stakeholders.iter().zip(&drafts) {
        for sys in &systems {
            let key = PairKey::new(&s.id, &sys.id);
            if truth.get(&key) != Some(&Label::Valid) {
                continue;
            }
            let is_home = d.home.map(|h| systems[h].id == sys.id).unwrap_or(false);
            let withheld = !(is_home && d.pinned) && rng.gen_bool(config.withheld_rate);
            let link = TraceLink {
                stake_id: s.id.clone(),
                sys_id: sys.id.clone(),
                label: LinkLabel::Valid,
                provenance: Provenance::Annotator,
            };
            if !withheld {
                links.push(link.clone());
            }
            ground_truth.push(link);
        }
        if d.fate == Fate::Invalid {
            let same_type: Vec<&SystemRequirement> =
                systems.iter().filter(|sys| sys.dtc_type == s.dtc_type && !covers(s, sys)).collect();
            let pool: Vec<&SystemRequirement> = if same_type.is_empty() {
                systems.iter().filter(|sys| !covers(s, sys)).collect()
            } else {
                same_type
            };
            if pool.is_empty() {
                return Err(CorpusError::Infeasible(format!(
                    "every system covers `{}`; enlarge message_vocabulary_size",
                    s.id
                )));
            }
            let target = pool[rng.gen_range(0..pool.len())];
            let link = TraceLink {
                stake_id: s.id.clone(),
                sys_id: target.id.clone(),
                label: LinkLabel::Invalid,
                provenance: Provenance::Annotator,
            };
            links.push(link.clone());
            ground_truth.push(link);
        }
    }

    Ok(SyntheticCorpus { corpus: Corpus::new(stakeholders, systems, links)?, ground_truth })
}
