//! Shared fixtures and brute-force oracles for the integration and
//! acceptance tests. Every oracle here is written without calling the code
//! it checks.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tracelink::corpus::{build_system, classify_stakeholder, generate_synthetic_corpus, MessageExtractor, SynthesisConfig, SyntheticCorpus};
use tracelink::gateway::{CompletionProvider, Gateway, MessageCoverageOracle, ProviderConfig};
use tracelink::model::{ConfusionCounts, Label, LabeledExample, PairKey, StakeholderRequirement, StrategyKind, SystemRequirement, Variation};
use tracelink::pipeline::Validator;
use tracelink::prompting::StrategyConfig;
use tracelink::retrieval::{Embedder, EmbeddingVector, LexicalEmbedder, Metric, RetrievalDatabase};

pub const CORPUS_SEED: u64 = 7;

pub fn synthetic_corpus() -> SyntheticCorpus {
    generate_synthetic_corpus(&SynthesisConfig { n_stakeholders: 200, n_systems: 8, random_seed: CORPUS_SEED, ..Default::default() })
        .unwrap()
}

pub fn validator(corpus: &tracelink::corpus::Corpus, kind: StrategyKind, provider: Arc<dyn CompletionProvider>) -> Validator {
    let embedder: Arc<dyn Embedder> = Arc::new(LexicalEmbedder::default());
    let db = RetrievalDatabase::build(corpus.labeled_examples(), embedder.as_ref()).unwrap();
    let gw = Arc::new(Gateway::new(provider, ProviderConfig::default()).unwrap());
    Validator::new(StrategyConfig::new(kind), gw, embedder, db).unwrap()
}

pub fn oracle_validator(corpus: &tracelink::corpus::Corpus) -> Validator {
    validator(corpus, StrategyKind::Rag, Arc::new(MessageCoverageOracle::default()))
}

/// A seeded share of the labeled links whose verdict the mock flips, plus
/// the flip-set fingerprints for the oracle.
pub fn flip_set(examples: &[LabeledExample], rate: f64, seed: u64) -> (BTreeSet<PairKey>, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (examples.len() as f64 * rate).round() as usize;
    let chosen: Vec<&LabeledExample> = examples.choose_multiple(&mut rng, n).collect();
    let keys = chosen.iter().map(|e| e.key()).collect();
    let prints = chosen.iter().map(|e| MessageCoverageOracle::fingerprint(&e.stakeholder, &e.system)).collect();
    (keys, prints)
}

/// Confusion matrix expected when exactly the `flipped` pairs are judged wrong.
pub fn confusion_from_flips(examples: &[LabeledExample], flipped: &BTreeSet<PairKey>) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for e in examples {
        let wrong = flipped.contains(&e.key());
        match (e.label, wrong) {
            (Label::Valid, false) => c.tp += 1,
            (Label::Valid, true) => c.fn_ += 1,
            (Label::Invalid, false) => c.tn += 1,
            (Label::Invalid, true) => c.fp += 1,
        }
    }
    c
}

// ---- golden prompts ----

pub struct GoldenCase {
    pub file: &'static str,
    pub strategy: StrategyConfig,
    pub examples: Option<Vec<LabeledExample>>,
    pub clarification: bool,
}

fn pair(id: &str, stake: &str, mature: &str, demature: &str) -> (StakeholderRequirement, SystemRequirement) {
    let ex = MessageExtractor::default();
    (classify_stakeholder(format!("S-{id}"), stake, None, &ex), build_system(format!("T-{id}"), "sys", mature, demature, &ex))
}

fn labeled(id: &str, stake: &str, mature: &str, demature: &str, label: Label) -> LabeledExample {
    let (stakeholder, system) = pair(id, stake, mature, demature);
    LabeledExample { example_id: id.into(), stakeholder, system, label }
}

fn valid_example(i: usize) -> LabeledExample {
    labeled(
        &format!("v{i}"),
        &format!("When BRK_PRESS_{i} exceeds the limit, the system shall set a fault."),
        &format!("BRK_PRESS_{i} above limit."),
        &format!("BRK_PRESS_{i} below limit."),
        Label::Valid,
    )
}

fn invalid_example(i: usize) -> LabeledExample {
    labeled(
        &format!("i{i}"),
        &format!("When DOOR_{i} is open, the system shall chime."),
        &format!("SPEED_{i} above threshold."),
        &format!("SPEED_{i} below threshold."),
        Label::Invalid,
    )
}

pub fn golden_query() -> (StakeholderRequirement, SystemRequirement) {
    pair(
        "q",
        "If the ignition signal IGN_STATUS is lost, the vehicle shall display a warning.",
        "IGN_STATUS is not received for 500 ms.",
        "IGN_STATUS is received.",
    )
}

pub fn golden_cases() -> Vec<GoldenCase> {
    let s = |kind: StrategyKind| StrategyConfig::new(kind);
    let rag = || StrategyConfig { k: 2, ..s(StrategyKind::Rag) };
    let rag_examples = || Some(vec![valid_example(1), invalid_example(1), valid_example(2), invalid_example(2)]);
    let few: Vec<LabeledExample> = (1..=8).flat_map(|i| [valid_example(i), invalid_example(i)]).collect();
    vec![
        GoldenCase { file: "zero_shot.txt", strategy: s(StrategyKind::ZeroShot), examples: None, clarification: false },
        GoldenCase {
            file: "zero_shot_explain.txt",
            strategy: StrategyConfig { explanation_mode: true, ..s(StrategyKind::ZeroShot) },
            examples: None,
            clarification: false,
        },
        GoldenCase { file: "cot.txt", strategy: s(StrategyKind::CoT), examples: None, clarification: false },
        GoldenCase { file: "self_consistency.txt", strategy: s(StrategyKind::SelfConsistency), examples: None, clarification: false },
        GoldenCase { file: "few_shot16.txt", strategy: s(StrategyKind::FewShot16), examples: Some(few), clarification: false },
        GoldenCase { file: "rag_k2.txt", strategy: rag(), examples: rag_examples(), clarification: false },
        GoldenCase {
            file: "rag_k2_explain.txt",
            strategy: StrategyConfig { explanation_mode: true, ..rag() },
            examples: rag_examples(),
            clarification: false,
        },
        GoldenCase { file: "rag_k2_clarification.txt", strategy: rag(), examples: rag_examples(), clarification: true },
    ]
}

pub fn fixture(file: &str) -> String {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/prompts").join(file);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Renders one golden case with the library; `Err` carries the first
/// differing line.
pub fn check_golden(case: &GoldenCase) -> Result<(), String> {
    let (s, t) = golden_query();
    let env = tracelink::prompting::build_prompt(&case.strategy, &s, &t, case.examples.as_deref()).map_err(|e| e.to_string())?;
    let text = if case.clarification { tracelink::prompting::with_clarification(&env.text) } else { env.text };
    let want = fixture(case.file);
    if text == want {
        return Ok(());
    }
    let line = text.lines().zip(want.lines()).position(|(a, b)| a != b).unwrap_or(text.lines().count().min(want.lines().count()));
    Err(format!("{}: first difference at line {}", case.file, line + 1))
}

// ---- metrics oracle ----

/// Round-half-up to 2 decimals of `100 * num / den`, in hundredths, exactly.
pub fn percent_hundredths(num: u128, den: u128) -> i64 {
    // floor(10000 * num / den + 1/2)
    ((20_000 * num + den) / (2 * den)) as i64
}

/// Exact expected report values (in hundredths of a percent) from a tally.
pub struct ExpectedMetrics {
    pub confusion: ConfusionCounts,
    pub accuracy: Option<i64>,
    pub valid_precision: Option<i64>,
    pub valid_recall: Option<i64>,
    pub valid_f1: Option<i64>,
    pub invalid_precision: Option<i64>,
    pub invalid_recall: Option<i64>,
    pub invalid_f1: Option<i64>,
    pub macro_f1: Option<i64>,
}

pub fn brute_force_metrics(preds: &[(PairKey, Label)], truth: &BTreeMap<PairKey, Label>) -> ExpectedMetrics {
    let (mut tp, mut fp, mut fn_, mut tn) = (0u128, 0u128, 0u128, 0u128);
    for (k, p) in preds {
        match (p, truth[k]) {
            (Label::Valid, Label::Valid) => tp += 1,
            (Label::Valid, Label::Invalid) => fp += 1,
            (Label::Invalid, Label::Valid) => fn_ += 1,
            (Label::Invalid, Label::Invalid) => tn += 1,
        }
    }
    let pct = |n: u128, d: u128| (d > 0).then(|| percent_hundredths(n, d));
    // F1 = 2pr/(p+r) = 2tp/(2tp+fp+fn), defined when p and r are; 0 when p+r = 0
    let f1 = |hit: u128, fa: u128, miss: u128| -> Option<(u128, u128)> {
        if hit + fa == 0 || hit + miss == 0 {
            return None;
        }
        Some((2 * hit, 2 * hit + fa + miss))
    };
    let vf = f1(tp, fp, fn_);
    let inf = f1(tn, fn_, fp);
    let macro_ = vf.zip(inf).map(|((a, b), (c, d))| percent_hundredths(a * d + c * b, 2 * b * d));
    ExpectedMetrics {
        confusion: ConfusionCounts { tp: tp as u64, fp: fp as u64, fn_: fn_ as u64, tn: tn as u64 },
        accuracy: pct(tp + tn, tp + fp + fn_ + tn),
        valid_precision: pct(tp, tp + fp),
        valid_recall: pct(tp, tp + fn_),
        valid_f1: vf.map(|(a, b)| percent_hundredths(a, b)),
        invalid_precision: pct(tn, tn + fn_),
        invalid_recall: pct(tn, tn + fp),
        invalid_f1: inf.map(|(a, b)| percent_hundredths(a, b)),
        macro_f1: macro_,
    }
}

pub fn hundredths(x: Option<f64>) -> Option<i64> {
    x.map(|v| (v * 100.0).round() as i64)
}

pub fn metrics_match(got: &tracelink::evaluation::MetricsReport, want: &ExpectedMetrics) -> bool {
    got.confusion == want.confusion
        && hundredths(got.accuracy) == want.accuracy
        && hundredths(got.valid_precision) == want.valid_precision
        && hundredths(got.valid_recall) == want.valid_recall
        && hundredths(got.valid_f1) == want.valid_f1
        && hundredths(got.invalid_precision) == want.invalid_precision
        && hundredths(got.invalid_recall) == want.invalid_recall
        && hundredths(got.invalid_f1) == want.invalid_f1
        && hundredths(got.macro_f1) == want.macro_f1
}

pub fn random_prediction_set(rng: &mut ChaCha8Rng) -> (Vec<(PairKey, Label)>, BTreeMap<PairKey, Label>) {
    let n = rng.gen_range(1..=200);
    let p_valid: f64 = rng.gen();
    let p_right: f64 = rng.gen();
    let mut preds = Vec::new();
    let mut truth = BTreeMap::new();
    for i in 0..n {
        let key = PairKey::new(format!("S{i}"), format!("T{}", i % 7));
        let t = if rng.gen_bool(p_valid) { Label::Valid } else { Label::Invalid };
        let p = if rng.gen_bool(p_right) { t } else { flip(t) };
        truth.insert(key.clone(), t);
        preds.push((key, p));
    }
    (preds, truth)
}

fn flip(l: Label) -> Label {
    match l {
        Label::Valid => Label::Invalid,
        Label::Invalid => Label::Valid,
    }
}

// ---- Fisher and kappa oracles ----

fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Two-sided Fisher p by enumerating every table with the same margins in
/// exact integer arithmetic.
pub fn fisher_by_enumeration(t: [[u64; 2]; 2]) -> f64 {
    let [[a, b], [c, d]] = t;
    let (r1, r2, c1) = (a + b, c + d, a + c);
    let n = r1 + r2;
    // P(x) = C(r1, x) C(r2, c1 - x) / C(n, c1); compare numerators only
    let weight = |x: u64| if x <= c1 { binomial(r1, x) * binomial(r2, c1 - x) } else { 0 };
    let observed = weight(a);
    let total: u128 = (0..=r1.min(c1)).map(weight).sum();
    let tail: u128 = (0..=r1.min(c1)).map(weight).filter(|&w| w > 0 && w <= observed).sum();
    debug_assert_eq!(total, binomial(n, c1));
    tail as f64 / total as f64
}

/// kappa = 2(ad - bc) / ((a+b)(b+d) + (a+c)(c+d)).
pub fn kappa_closed_form(t: [[u64; 2]; 2]) -> Option<f64> {
    let [[a, b], [c, d]] = t.map(|r| r.map(|x| x as f64));
    let den = (a + b) * (b + d) + (a + c) * (c + d);
    (den != 0.0).then(|| 2.0 * (a * d - b * c) / den)
}

// ---- retrieval oracle ----

pub struct RandomDb {
    pub examples: Vec<LabeledExample>,
    pub vectors: Vec<Vec<f64>>,
}

/// One prototype stakeholder per variation, cloned under fresh ids.
pub fn prototypes() -> Vec<StakeholderRequirement> {
    let ex = MessageExtractor::default();
    Variation::KNOWN
        .iter()
        .map(|&v| {
            let text = tracelink::corpus::templates::stakeholder_text(v, "MSG_A", tracelink::model::ConditionKind::Mature);
            classify_stakeholder("proto", &text, Some(v), &ex)
        })
        .collect()
}

pub fn random_db(rng: &mut ChaCha8Rng, protos: &[StakeholderRequirement], system: &SystemRequirement) -> RandomDb {
    let n = rng.gen_range(1..=2000);
    let dim = rng.gen_range(2..=6);
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(rng);
    let mut examples = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for id in ids {
        let mut s = protos[rng.gen_range(0..protos.len())].clone();
        s.id = format!("S{id}");
        let label = if rng.gen_bool(0.5) { Label::Valid } else { Label::Invalid };
        examples.push(LabeledExample { example_id: format!("E{id:05}"), stakeholder: s, system: system.clone(), label });
        // small integer components make exact ties common
        let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(0..4) as f64).collect();
        if v.iter().all(|x| *x == 0.0) {
            v[0] = 1.0;
        }
        vectors.push(v);
    }
    RandomDb { examples, vectors }
}

/// Full sort of every eligible entry; returns (valid ids, invalid ids).
pub fn brute_force_top_k(
    db: &RandomDb,
    query: &[f64],
    k: usize,
    metric: Metric,
    exclusion: &HashSet<String>,
    variation_exclusion: Option<Variation>,
) -> (Vec<String>, Vec<String>) {
    let score = |v: &[f64]| -> f64 {
        match metric {
            Metric::Cosine => {
                let dot: f64 = v.iter().zip(query).map(|(a, b)| a * b).sum();
                let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nq = query.iter().map(|x| x * x).sum::<f64>().sqrt();
                // negated so that smaller is better for both metrics
                -(dot / (nv * nq)).clamp(-1.0, 1.0)
            }
            Metric::Euclidean => v.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
        }
    };
    let mut all: Vec<(f64, &str, Label)> = db
        .examples
        .iter()
        .zip(&db.vectors)
        .filter(|(e, _)| !exclusion.contains(&e.example_id))
        .filter(|(e, _)| variation_exclusion != Some(e.stakeholder.variation))
        .map(|(e, v)| (score(v), e.example_id.as_str(), e.label))
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(b.1)));
    let pick = |l: Label| all.iter().filter(|x| x.2 == l).take(k).map(|x| x.1.to_string()).collect();
    (pick(Label::Valid), pick(Label::Invalid))
}

pub fn to_vector(v: &[f64]) -> EmbeddingVector {
    EmbeddingVector::new(v.to_vec()).unwrap()
}

// ---- sweep oracle ----

/// Best (threshold, macro-F1 in percent) by recomputing every threshold
/// i/1000 from scratch; ties go to the smallest threshold.
pub fn brute_force_sweep(sims: &[f64], truth: &[Label]) -> (f64, Option<f64>) {
    let mut best: Option<(f64, f64)> = None;
    for i in 0..=1000u32 {
        let t = f64::from(i) / 1000.0;
        let (mut tp, mut fp, mut fn_, mut tn) = (0.0, 0.0, 0.0, 0.0);
        for (s, l) in sims.iter().zip(truth) {
            let s = s.clamp(0.0, 1.0);
            match (s >= t, l) {
                (true, Label::Valid) => tp += 1.0,
                (true, Label::Invalid) => fp += 1.0,
                (false, Label::Valid) => fn_ += 1.0,
                (false, Label::Invalid) => tn += 1.0,
            }
        }
        let f1 = |h: f64, a: f64, m: f64| (h + a > 0.0 && h + m > 0.0).then(|| 100.0 * 2.0 * h / (2.0 * h + a + m));
        if let (Some(v), Some(n)) = (f1(tp, fp, fn_), f1(tn, fn_, fp)) {
            let m = (v + n) / 2.0;
            if best.is_none_or(|(_, b)| m > b + 1e-9) {
                best = Some((t, m));
            }
        }
    }
    match best {
        Some((t, m)) => (t, Some(m)),
        None => (0.0, None),
    }
}

/// Twenty labeled toy pairs built from a small vocabulary so that tf-idf
/// similarities spread over (0, 1).
pub fn toy_pairs(rng: &mut ChaCha8Rng) -> Vec<LabeledExample> {
    const WORDS: [&str; 12] =
        ["BRAKE_MSG", "DOOR_MSG", "SPEED_SIG", "LAMP_MSG", "fault", "lost", "received", "timeout", "plausibility", "signal", "module", "cycle"];
    let ex = MessageExtractor::default();
    (0..20)
        .map(|i| {
            let words = |rng: &mut ChaCha8Rng| -> String {
                let n = rng.gen_range(2..=6);
                (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
            };
            let (s, m, d) = (words(rng), words(rng), words(rng));
            let label = if rng.gen_bool(0.5) { Label::Valid } else { Label::Invalid };
            LabeledExample {
                example_id: format!("toy{i}"),
                stakeholder: classify_stakeholder(format!("S{i}"), &s, None, &ex),
                system: build_system(format!("T{i}"), "toy", &m, &d, &ex),
                label,
            }
        })
        .collect()
}
