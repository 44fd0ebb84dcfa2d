//! Metrics, agreement and significance statistics, the leave-one-out and
//! robustness drivers, and the tf-idf threshold baseline.

mod harness;
mod metrics;
mod report;
mod stats;
mod sweep;
mod tfidf;

use thiserror::Error;

pub use harness::{run_loocv, run_robustness, LoocvReport, RobustnessReport, Trial};
pub use metrics::{
    compute_correctness, compute_metrics, macro_f1_of, round_half_up, MetricsReport, RawMetrics, RecoveryReport,
};
pub use report::{append_report, render_funnel, render_metrics_table, render_robustness_table, ReportRecord};
pub use stats::{
    cohen_kappa, fisher_exact_two_sided, ln_factorial, ln_hypergeometric, AgreementReport, Table2,
};
pub use sweep::{sweep_threshold, tfidf_pair_similarities, threshold_sweep, SweepPoint, SweepResult, SWEEP_STEPS};
pub use tfidf::{tfidf_tokens, tfidf_vectors, TfidfModel};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction and truth cover different pairs: {0}")]
    PairSetMismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
}
