//! Command-line front end. The binary only calls [`run`].

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::{AppConfig, Engine, InterfaceError, ProviderKind, ServerHandle, ValidateRequest};
use crate::corpus::{generate_synthetic_corpus, write_corpus, write_links, SynthesisConfig};
use crate::evaluation::{
    append_report, cohen_kappa, fisher_exact_two_sided, render_funnel, render_metrics_table, render_robustness_table,
    run_loocv, run_robustness, tfidf_pair_similarities, threshold_sweep, ReportRecord, Table2,
};
use crate::gateway::Mode;
use crate::model::{Label, StrategyKind};
use crate::recovery::write_recovery;
use crate::retrieval::Metric;

#[derive(Debug, Parser)]
#[command(name = "tracelink", version, about = "Validate and recover requirement trace links")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// oracle, scripted or http.
    #[arg(long, global = true)]
    pub provider: Option<String>,
    /// ZeroShot, CoT, FewShot16, SelfConsistency or RAG.
    #[arg(long, global = true)]
    pub strategy: Option<StrategyKind>,
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true)]
    pub metric: Option<Metric>,
    #[arg(long, global = true)]
    pub mode: Option<Mode>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Where the command writes its result.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus with a known ground truth.
    GenCorpus {
        #[arg(long, default_value_t = 200)]
        stakeholders: usize,
        #[arg(long, default_value_t = 8)]
        systems: usize,
        #[arg(long)]
        withheld_rate: Option<f64>,
    },
    /// Validate one pair.
    Validate {
        #[arg(long)]
        stake_id: Option<String>,
        #[arg(long)]
        stake_text: Option<String>,
        #[arg(long)]
        sys_id: Option<String>,
        /// `Mature: ... Demature: ...`
        #[arg(long)]
        sys_text: Option<String>,
        #[arg(long)]
        explain: bool,
    },
    /// Recover missing links and queue them for review.
    Recover,
    /// Leave-one-out or robustness evaluation over the labeled links.
    Evaluate {
        #[arg(value_enum)]
        protocol: Protocol,
    },
    /// tf-idf similarity threshold baseline over the labeled links.
    Sweep,
    /// Cohen's kappa of a 2x2 agreement table `a,b,c,d`.
    Kappa { table: String },
    /// Two-sided Fisher exact test of a 2x2 table `a,b,c,d`.
    Fisher { table: String },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        bind: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Protocol {
    Loocv,
    Robustness,
}

fn parse_table(s: &str) -> Result<Table2, InterfaceError> {
    let cells: Vec<u64> = s
        .split(',')
        .map(|c| c.trim().parse::<u64>())
        .collect::<Result<_, _>>()
        .map_err(|e| InterfaceError::BadRequest(format!("table `{s}`: {e}")))?;
    match cells[..] {
        [a, b, c, d] => Ok([[a, b], [c, d]]),
        _ => Err(InterfaceError::BadRequest(format!("table `{s}` needs four counts a,b,c,d"))),
    }
}

/// Config file (if any) with global flags applied on top.
pub fn resolve_config(g: &GlobalArgs) -> Result<AppConfig, InterfaceError> {
    let mut cfg = match &g.config {
        Some(p) => AppConfig::load(p)?,
        None => AppConfig::default(),
    };
    if let Some(p) = &g.provider {
        cfg.provider.kind = match p.to_ascii_lowercase().as_str() {
            "oracle" | "mock" => ProviderKind::Oracle,
            "scripted" => ProviderKind::Scripted,
            "http" => ProviderKind::Http,
            other => return Err(InterfaceError::Config(format!("unknown provider `{other}`"))),
        };
    }
    if let Some(s) = g.strategy {
        cfg.strategy.kind = s;
    }
    if let Some(k) = g.k {
        cfg.strategy.k = k;
    }
    if let Some(m) = g.metric {
        cfg.metric = m;
    }
    if let Some(m) = g.mode {
        cfg.mode = m;
    }
    if let Some(s) = g.seed {
        cfg.strategy.fewshot_seed = s;
    }
    cfg.strategy.validate().map_err(|e| InterfaceError::Config(e.to_string()))?;
    Ok(cfg)
}

fn report(path: &Path, records: &[ReportRecord]) -> Result<(), InterfaceError> {
    append_report(path, records)?;
    Ok(())
}

fn json_line(out: &mut dyn Write, value: &impl serde::Serialize) -> Result<(), InterfaceError> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(|e| InterfaceError::Other(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

/// Executes a parsed command line, writing human output to `out`.
pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), InterfaceError> {
    let cfg = resolve_config(&cli.global)?;
    let reports_path = cli.global.out.clone().unwrap_or_else(|| cfg.reports_path.clone());
    let strategy_name = cfg.strategy.kind.to_string();
    match cli.command {
        Command::GenCorpus { stakeholders, systems, withheld_rate } => {
            let mut sc = SynthesisConfig { n_stakeholders: stakeholders, n_systems: systems, ..Default::default() };
            if let Some(r) = withheld_rate {
                sc.withheld_rate = r;
            }
            if let Some(s) = cli.global.seed {
                sc.random_seed = s;
            }
            let synth = generate_synthetic_corpus(&sc)?;
            let dir = cli.global.out.clone().unwrap_or_else(|| cfg.corpus_dir.clone());
            write_corpus(&synth.corpus, &dir)?;
            write_links(&synth.ground_truth, &dir.join("ground_truth.jsonl"))?;
            writeln!(
                out,
                "wrote {} stakeholders, {} systems, {} links ({} withheld valid) to {}",
                synth.corpus.stakeholders().len(),
                synth.corpus.systems().len(),
                synth.corpus.links().len(),
                synth.withheld_valid().len(),
                dir.display()
            )?;
        }
        Command::Validate { stake_id, stake_text, sys_id, sys_text, explain } => {
            let engine = Engine::from_config(cfg)?;
            let req = ValidateRequest {
                stake_id,
                stake_text,
                sys_id,
                sys_text,
                explanation_mode: explain.then_some(true),
                ..Default::default()
            };
            json_line(out, &engine.handle_validate(&req)?)?;
        }
        Command::Recover => {
            let engine = Engine::from_config(cfg)?;
            let strategy = engine.config().strategy.clone();
            let (outcome, added) = engine.run_recovery(strategy, |_, _| {})?;
            if let Some(p) = &cli.global.out {
                write_recovery(&outcome, p)?;
            }
            write!(out, "{}", render_funnel(&outcome.funnel))?;
            writeln!(out, "recovered {} links, {} newly queued for review", outcome.recovered.len(), added)?;
        }
        Command::Evaluate { protocol } => {
            let engine = Engine::from_config(cfg)?;
            let (validator, _) = engine.validator(engine.config().strategy.clone())?;
            let corpus = engine.corpus().clone();
            match protocol {
                Protocol::Loocv => {
                    let r = run_loocv(&corpus, &validator)?;
                    write!(out, "{}", render_metrics_table(&[(strategy_name.clone(), r.metrics.clone())]))?;
                    if !r.skipped.is_empty() {
                        writeln!(out, "skipped {} pairs", r.skipped.len())?;
                    }
                    report(&reports_path, &[ReportRecord::Metrics { name: format!("loocv/{strategy_name}"), report: r.metrics }])?;
                }
                Protocol::Robustness => {
                    let r = run_robustness(&corpus, &validator)?;
                    write!(out, "{}", render_robustness_table(&r))?;
                    let mut records: Vec<ReportRecord> = r
                        .per_variation
                        .iter()
                        .map(|(v, m)| ReportRecord::Metrics { name: format!("robustness/{v}"), report: m.clone() })
                        .collect();
                    records.push(ReportRecord::Metrics { name: "robustness/all".into(), report: r.pooled });
                    report(&reports_path, &records)?;
                }
            }
        }
        Command::Sweep => {
            let engine = Engine::from_config(cfg)?;
            let examples = engine.corpus().labeled_examples();
            let sims = tfidf_pair_similarities(&examples)?;
            let truth: Vec<Label> = examples.iter().map(|e| e.label).collect();
            let result = threshold_sweep(&sims, &truth)?;
            writeln!(
                out,
                "best threshold {:.3} macro-F1 {}",
                result.best_threshold,
                result.best_macro_f1.map_or("n/a".to_string(), |f| format!("{:.2}", f * 100.0))
            )?;
            report(&reports_path, &[ReportRecord::Sweep { name: "tfidf".into(), result }])?;
        }
        Command::Kappa { table } => {
            let r = cohen_kappa(&parse_table(&table)?)?;
            writeln!(out, "kappa {:.4} (observed {:.4}, expected {:.4})", r.kappa, r.observed_agreement, r.expected_agreement)?;
            if cli.global.out.is_some() {
                report(&reports_path, &[ReportRecord::Agreement { name: "kappa".into(), report: r }])?;
            }
        }
        Command::Fisher { table } => {
            let t = parse_table(&table)?;
            let p = fisher_exact_two_sided(&t)?;
            writeln!(out, "two-sided p = {p:.6e}")?;
            if cli.global.out.is_some() {
                report(&reports_path, &[ReportRecord::Fisher { name: "fisher".into(), table: t, p_value: p }])?;
            }
        }
        Command::Serve { bind } => {
            let bind = bind.unwrap_or_else(|| cfg.server.bind.clone());
            let token = match &cfg.server.auth_token_env {
                Some(var) => Some(
                    std::env::var(var).map_err(|_| InterfaceError::Config(format!("environment variable {var} is not set")))?,
                ),
                None => None,
            };
            let engine = Arc::new(Engine::from_config(cfg)?);
            let server = ServerHandle::start(engine, &bind, token)?;
            writeln!(out, "listening on http://{}", server.addr())?;
            out.flush()?;
            server.wait()?;
        }
    }
    Ok(())
}

/// Parses `args` and executes them; the exit code is nonzero on failure.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    match execute(cli, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
