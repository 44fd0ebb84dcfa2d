// The similarity-threshold baseline: tf-idf cosine between the two
// requirement texts, best cut over 1001 thresholds.

use tracelink::corpus::{generate_synthetic_corpus, SynthesisConfig};
use tracelink::evaluation::{tfidf_pair_similarities, threshold_sweep};
use tracelink::model::Label;

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let examples = generate_synthetic_corpus(&SynthesisConfig::default())?.corpus.labeled_examples();
    let sims = tfidf_pair_similarities(&examples)?;
    let truth: Vec<Label> = examples.iter().map(|e| e.label).collect();
    let r = threshold_sweep(&sims, &truth)?;
    println!("best threshold {:.3}, macro-F1 {:?}", r.best_threshold, r.best_macro_f1);
    for p in r.curve.iter().step_by(100) {
        println!("  t={:.1} macro-F1 {}", p.threshold, p.macro_f1.map_or("n/a".into(), |m| format!("{m:.2}")));
    }
    Ok(())
}

fn main() {
    run().unwrap();
}
