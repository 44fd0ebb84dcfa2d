// Per-variation robustness: each pair is judged with examples from the
// other variations only.

use std::sync::Arc;

use tracelink::corpus::{generate_synthetic_corpus, SynthesisConfig};
use tracelink::evaluation::{render_robustness_table, run_robustness};
use tracelink::gateway::{Gateway, MessageCoverageOracle, ProviderConfig};
use tracelink::model::StrategyKind;
use tracelink::pipeline::Validator;
use tracelink::prompting::StrategyConfig;
use tracelink::retrieval::{Embedder, LexicalEmbedder, RetrievalDatabase};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = generate_synthetic_corpus(&SynthesisConfig::default())?.corpus;
    let embedder: Arc<dyn Embedder> = Arc::new(LexicalEmbedder::default());
    let database = RetrievalDatabase::build(corpus.labeled_examples(), embedder.as_ref())?;
    let gateway = Arc::new(Gateway::new(Arc::new(MessageCoverageOracle::default()), ProviderConfig::default())?);
    let v = Validator::new(StrategyConfig::new(StrategyKind::Rag), gateway, embedder, database)?;

    let r = run_robustness(&corpus, &v)?;
    print!("{}", render_robustness_table(&r));
    let t = &r.trials[0];
    println!("\n{} ({}) saw {:?}", t.example_id, t.variation, t.retrieved_example_ids);
    Ok(())
}

fn main() {
    run().unwrap();
}
