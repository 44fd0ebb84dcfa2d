// Generate a seeded synthetic corpus and look at what is in it.

use std::collections::BTreeMap;

use tracelink::corpus::{generate_synthetic_corpus, SynthesisConfig};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let synth = generate_synthetic_corpus(&SynthesisConfig { n_stakeholders: 120, n_systems: 6, ..Default::default() })?;
    let corpus = &synth.corpus;

    let mut by_variation = BTreeMap::new();
    for s in corpus.stakeholders() {
        *by_variation.entry(s.variation.to_string()).or_insert(0) += 1;
    }
    println!("{} stakeholder requirements {by_variation:?}", corpus.stakeholders().len());
    println!("{} system requirements, {} recorded links", corpus.systems().len(), corpus.links().len());
    println!("{} valid links withheld from the record", synth.withheld_valid().len());

    let s = &corpus.stakeholders()[0];
    println!("\n{} [{}] messages {:?}\n  {}", s.id, s.variation, s.messages, s.text);
    let t = &corpus.systems()[0];
    println!("{} ({:?})\n  Mature: {}\n  Demature: {}", t.id, t.dtc_type, t.mature_text, t.demature_text);
    Ok(())
}

fn main() {
    run().unwrap();
}
