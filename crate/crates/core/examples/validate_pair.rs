// Validate single pairs with retrieval-augmented prompting against the
// offline coverage oracle.

use std::sync::Arc;

use tracelink::corpus::{generate_synthetic_corpus, SynthesisConfig};
use tracelink::gateway::{Gateway, MessageCoverageOracle, ProviderConfig};
use tracelink::model::StrategyKind;
use tracelink::pipeline::{ValidationQuery, Validator, VerdictFn};
use tracelink::prompting::StrategyConfig;
use tracelink::retrieval::{Embedder, LexicalEmbedder, RetrievalDatabase};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let synth = generate_synthetic_corpus(&SynthesisConfig::default())?;
    let corpus = &synth.corpus;
    let embedder: Arc<dyn Embedder> = Arc::new(LexicalEmbedder::default());
    let database = RetrievalDatabase::build(corpus.labeled_examples(), embedder.as_ref())?;
    let gateway = Arc::new(Gateway::new(Arc::new(MessageCoverageOracle::default()), ProviderConfig::default())?);
    let strategy = StrategyConfig { explanation_mode: true, ..StrategyConfig::new(StrategyKind::Rag) };
    let validator = Validator::new(strategy, gateway, embedder, database)?;

    for link in corpus.labeled_examples().iter().take(3) {
        let q = ValidationQuery::new(&link.stakeholder, &link.system).excluding(&link.example_id);
        let v = validator.verdict(&q)?;
        println!("{} -> {} (recorded {:?})", link.example_id, v.decision, link.label);
        println!("  retrieved {:?}", v.retrieved_example_ids.unwrap_or_default());
        if let Some(e) = v.explanation {
            println!("  {}", e.replace('\n', "\n  "));
        }
    }
    Ok(())
}

fn main() {
    run().unwrap();
}
