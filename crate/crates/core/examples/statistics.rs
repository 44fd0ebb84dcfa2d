// Agreement, significance and metric arithmetic.

use tracelink::evaluation::{cohen_kappa, compute_correctness, fisher_exact_two_sided, macro_f1_of, MetricsReport};
use tracelink::model::ConfusionCounts;

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let k = cohen_kappa(&[[180, 3], [1, 16]])?;
    println!("kappa {:.3} (observed {:.3}, expected {:.3})", k.kappa, k.observed_agreement, k.expected_agreement);

    // correct / incorrect counts of two strategies
    let p = fisher_exact_two_sided(&[[172, 5], [150, 27]])?;
    println!("Fisher two-sided p = {p:.3e}");

    println!("macro-F1 of 88.04 and 29.45 = {:.2}", macro_f1_of(88.04, 29.45));
    let c = compute_correctness(429, 502)?;
    println!("correctness 429/502 = {:.2}%", c.correctness.unwrap_or(f64::NAN));

    let m = MetricsReport::from_confusion(ConfusionCounts { tp: 40, fp: 0, fn_: 2, tn: 0 });
    println!("all-valid predictions: accuracy {:?}, undefined {:?}", m.accuracy, m.undefined);
    Ok(())
}

fn main() {
    run().unwrap();
}
