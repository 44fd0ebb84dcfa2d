// Drive the command-line front end from a TOML config, as the binary does.

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let corpus = dir.path().join("corpus");
    let config = dir.path().join("tracelink.toml");
    std::fs::write(
        &config,
        format!(
            r#"corpus_dir = {corpus:?}
store_path = {:?}
reports_path = {:?}
metric = "cosine"

[provider]
kind = "oracle"
max_retries = 2

[strategy]
kind = "RAG"
k = 3
"#,
            dir.path().join("store.jsonl"),
            dir.path().join("reports.jsonl"),
        ),
    )?;
    let cfg = config.to_str().ok_or("non-utf8 path")?;
    let corpus = corpus.to_str().ok_or("non-utf8 path")?;

    for args in [
        vec!["--seed", "11", "--out", corpus, "gen-corpus", "--stakeholders", "80", "--systems", "5"],
        vec!["--config", cfg, "evaluate", "loocv"],
        vec!["--config", cfg, "--k", "1", "evaluate", "robustness"],
        vec!["--config", cfg, "sweep"],
        vec!["--config", cfg, "recover"],
        vec!["fisher", "8,2,1,5"],
        vec!["kappa", "20,5,10,15"],
    ] {
        println!("$ tracelink {}", args.join(" "));
        let code = tracelink::interface::cli::run(std::iter::once("tracelink").chain(args));
        if code != 0 {
            return Err(format!("exit code {code}").into());
        }
    }
    Ok(())
}

fn main() {
    run().unwrap();
}
