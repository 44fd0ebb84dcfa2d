// Start the HTTP service, queue recovered links, accept one and watch it
// become a retrieval example.

use std::sync::Arc;

use serde_json::{json, Value};
use tracelink::corpus::{generate_synthetic_corpus, SynthesisConfig};
use tracelink::gateway::{Gateway, MessageCoverageOracle, ProviderConfig};
use tracelink::interface::{AppConfig, Engine, ExampleStore, ServerHandle};
use tracelink::retrieval::{Embedder, LexicalEmbedder};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = generate_synthetic_corpus(&SynthesisConfig::default())?.corpus;
    let gateway = Gateway::new(Arc::new(MessageCoverageOracle::default()), ProviderConfig::default())?;
    let embedder: Arc<dyn Embedder> = Arc::new(LexicalEmbedder::default());
    let engine = Engine::new(AppConfig::default(), Arc::new(corpus), Arc::new(ExampleStore::in_memory()), Arc::new(gateway), embedder)?;
    let engine = Arc::new(engine);

    // queue candidates directly; POST /recover does the same asynchronously
    let (outcome, queued) = engine.run_recovery(engine.config().strategy.clone(), |_, _| {})?;
    println!("{} recovered, {queued} queued", outcome.recovered.len());

    let server = ServerHandle::start(engine, "127.0.0.1:0", None)?;
    println!("serving on {}", server.url(""));

    let queue: Value = ureq::get(&server.url("/review/queue?limit=1")).call()?.body_mut().read_json()?;
    let item_id = queue["items"][0]["item_id"].as_str().ok_or("empty queue")?.to_string();
    let path = format!("/review/{}/decision", item_id.replace('|', "%7C"));
    let receipt: Value =
        ureq::post(&server.url(&path)).send_json(json!({"decision": "accept", "reviewer": "demo"}))?.body_mut().read_json()?;
    println!("accepted {item_id}; store version {}", receipt["store_version"]);

    let body = json!({"stake_text": queue["items"][0]["stakeholder"]["text"], "sys_id": queue["items"][0]["system"]["id"]});
    let v: Value = ureq::post(&server.url("/validate")).send_json(body)?.body_mut().read_json()?;
    println!("validate -> {} with examples {}", v["verdict"], v["retrieved_example_ids"]);
    Ok(())
}

fn main() {
    run().unwrap();
}
