// Recover unrecorded links: prefilter every unlinked pair, then validate
// the survivors.

use std::sync::Arc;

use tracelink::corpus::{generate_synthetic_corpus, SynthesisConfig};
use tracelink::evaluation::render_funnel;
use tracelink::gateway::{Gateway, MessageCoverageOracle, ProviderConfig};
use tracelink::model::StrategyKind;
use tracelink::pipeline::Validator;
use tracelink::prompting::StrategyConfig;
use tracelink::recovery::{read_recovery, recover_links, write_recovery, PrefilterOptions};
use tracelink::retrieval::{Embedder, LexicalEmbedder, RetrievalDatabase};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let synth = generate_synthetic_corpus(&SynthesisConfig::default())?;
    let corpus = &synth.corpus;
    let embedder: Arc<dyn Embedder> = Arc::new(LexicalEmbedder::default());
    let database = RetrievalDatabase::build(corpus.labeled_examples(), embedder.as_ref())?;
    let gateway = Arc::new(Gateway::new(Arc::new(MessageCoverageOracle::default()), ProviderConfig::default())?);
    let v = Validator::new(StrategyConfig::new(StrategyKind::Rag), gateway, embedder, database)?;

    let outcome = recover_links(corpus, &v, &PrefilterOptions::default());
    print!("{}", render_funnel(&outcome.funnel));
    for r in outcome.recovered.iter().take(5) {
        println!("  {} via {} side, shared {:?}", r.key(), r.condition_side, r.shared_messages);
    }
    println!("withheld in the synthetic record: {}", synth.withheld_valid().len());

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("recovered.jsonl");
    write_recovery(&outcome, &path)?;
    println!("round trip through {}: {} links", path.display(), read_recovery(&path)?.recovered.len());
    Ok(())
}

fn main() {
    run().unwrap();
}
