use std::fs::OpenOptions;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AgreementReport, MetricsReport, RecoveryReport, RobustnessReport, SweepResult};
use crate::recovery::FunnelReport;

/// One line of a report file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum ReportRecord {
    Metrics { name: String, report: MetricsReport },
    Sweep { name: String, result: SweepResult },
    Agreement { name: String, report: AgreementReport },
    Fisher { name: String, table: [[u64; 2]; 2], p_value: f64 },
    Correctness { name: String, report: RecoveryReport },
    Funnel { name: String, report: FunnelReport },
}

/// Appends records to a JSONL report file.
pub fn append_report(path: &Path, records: &[ReportRecord]) -> std::io::Result<()> {
    let mut w = BufWriter::new(OpenOptions::new().create(true).append(true).open(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.2}"))
}

const HEADER: [&str; 8] = ["Acc", "V-P", "V-R", "V-F1", "I-P", "I-R", "I-F1", "Macro-F1"];

fn metric_cells(m: &MetricsReport) -> Vec<String> {
    [
        m.accuracy,
        m.valid_precision,
        m.valid_recall,
        m.valid_f1,
        m.invalid_precision,
        m.invalid_recall,
        m.invalid_f1,
        m.macro_f1,
    ]
    .into_iter()
    .map(cell)
    .collect()
}

fn render(first: &str, rows: Vec<(String, Vec<String>)>, header: &[&str]) -> String {
    let mut widths: Vec<usize> = std::iter::once(first.len()).chain(header.iter().map(|h| h.len())).collect();
    for (name, cells) in &rows {
        widths[0] = widths[0].max(name.len());
        for (i, c) in cells.iter().enumerate() {
            widths[i + 1] = widths[i + 1].max(c.len());
        }
    }
    let line = |name: &str, cells: &[String]| -> String {
        let mut s = format!("{name:<w$}", w = widths[0]);
        for (i, c) in cells.iter().enumerate() {
            s.push_str(&format!("  {c:>w$}", w = widths[i + 1]));
        }
        s.trim_end().to_string()
    };
    let head: Vec<String> = header.iter().map(|h| h.to_string()).collect();
    let mut out = vec![line(first, &head)];
    out.push("-".repeat(out[0].len()));
    out.extend(rows.iter().map(|(n, c)| line(n, c)));
    out.join("\n") + "\n"
}

/// One row per strategy (or model) with accuracy and per-class metrics.
pub fn render_metrics_table(rows: &[(String, MetricsReport)]) -> String {
    render("Strategy", rows.iter().map(|(n, m)| (n.clone(), metric_cells(m))).collect(), &HEADER)
}

/// One row per held-out variation plus the pooled "All" row.
pub fn render_robustness_table(report: &RobustnessReport) -> String {
    let mut rows: Vec<(String, Vec<String>)> =
        report.per_variation.iter().map(|(v, m)| (v.to_string(), metric_cells(m))).collect();
    rows.push(("All".into(), metric_cells(&report.pooled)));
    render("Variation", rows, &HEADER)
}

pub fn render_funnel(f: &FunnelReport) -> String {
    let rows = vec![
        ("Candidate pairs".to_string(), vec![f.total_candidates.to_string()]),
        ("Same DTC type".to_string(), vec![f.after_stage1.to_string()]),
        ("Bound condition side".to_string(), vec![f.after_stage2.to_string()]),
        ("Shared message".to_string(), vec![f.after_stage3.to_string()]),
        ("Predicted valid".to_string(), vec![f.predicted_valid.to_string()]),
        ("Skipped (errors)".to_string(), vec![f.skipped.to_string()]),
    ];
    render("Stage", rows, &["Pairs"])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ConfusionCounts;

    #[test]
    fn table_shape() {
        let m = MetricsReport::from_confusion(ConfusionCounts { tp: 3, fp: 1, fn_: 1, tn: 1 });
        let t = render_metrics_table(&[("RAG".into(), m.clone()), ("Zero-Shot".into(), MetricsReport::default())]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("Strategy") && lines[0].ends_with("Macro-F1"));
        assert!(lines[2].contains("66.67") && lines[2].ends_with("62.50"));
        assert!(lines[3].contains("n/a"));
    }

    #[test]
    fn records_append() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.jsonl");
        let rec = ReportRecord::Fisher { name: "x".into(), table: [[1, 2], [3, 4]], p_value: 1.0 };
        append_report(&p, &[rec.clone()]).unwrap();
        append_report(&p, &[rec.clone()]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 2);
        let back: ReportRecord = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(back, rec);
    }
}
