// The prompt each strategy sends for the same pair.

use tracelink::corpus::{generate_synthetic_corpus, SynthesisConfig};
use tracelink::model::StrategyKind;
use tracelink::prompting::{build_prompt, interleave, StrategyConfig};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = generate_synthetic_corpus(&SynthesisConfig::default())?.corpus;
    let examples = corpus.labeled_examples();
    let query = &examples[0];
    let valid: Vec<_> = examples[1..].iter().filter(|e| e.label == tracelink::model::Label::Valid).take(2).cloned().collect();
    let invalid: Vec<_> = examples[1..].iter().filter(|e| e.label == tracelink::model::Label::Invalid).take(2).cloned().collect();
    let context = interleave(&valid, &invalid);

    for kind in [StrategyKind::ZeroShot, StrategyKind::CoT, StrategyKind::Rag] {
        let strategy = StrategyConfig { k: 2, ..StrategyConfig::new(kind) };
        let ex = (kind == StrategyKind::Rag).then_some(&context[..]);
        let p = build_prompt(&strategy, &query.stakeholder, &query.system, ex)?;
        println!("===== {kind} ({} examples) =====\n{}\n", p.included_example_ids.len(), p.text);
    }

    // explanation mode drops the Yes/No-only clause
    let explain = StrategyConfig { explanation_mode: true, ..StrategyConfig::new(StrategyKind::ZeroShot) };
    let p = build_prompt(&explain, &query.stakeholder, &query.system, None)?;
    println!("===== zero-shot, explanation mode =====\n{}", p.text);
    Ok(())
}

fn main() {
    run().unwrap();
}
