//! Line-delimited JSON corpus files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{build_system, classify_stakeholder, trigger_clause_count, Corpus, CorpusError, MessageExtractor};
use crate::model::{LinkLabel, Label, Provenance, TraceLink, Variation};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StakeholderRecord {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variation: Option<Variation>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemRecord {
    pub id: String,
    pub name: String,
    pub mature: String,
    pub demature: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkRecord {
    pub stake_id: String,
    pub sys_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
}

fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>, CorpusError> {
    let body = fs::read_to_string(path)?;
    let file = path.display().to_string();
    body.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map(|r| (i + 1, r))
                .map_err(|e| CorpusError::Malformed { file: file.clone(), line: i + 1, reason: e.to_string() })
        })
        .collect()
}

/// Loads a corpus with the default message extractor.
pub fn load_corpus(stakeholder_path: &Path, system_path: &Path, links_path: &Path) -> Result<Corpus, CorpusError> {
    load_corpus_with(stakeholder_path, system_path, links_path, &MessageExtractor::default())
}

pub fn load_corpus_with(
    stakeholder_path: &Path,
    system_path: &Path,
    links_path: &Path,
    extractor: &MessageExtractor,
) -> Result<Corpus, CorpusError> {
    let file = stakeholder_path.display().to_string();
    let mut stakeholders = Vec::new();
    for (line, r) in read_records::<StakeholderRecord>(stakeholder_path)? {
        let clauses = trigger_clause_count(&r.text);
        if clauses > 1 {
            return Err(CorpusError::Compound { file: file.clone(), line, id: r.id, clauses });
        }
        stakeholders.push(classify_stakeholder(r.id, &r.text, r.variation, extractor));
    }
    let systems = read_records::<SystemRecord>(system_path)?
        .into_iter()
        .map(|(_, r)| build_system(r.id, r.name, &r.mature, &r.demature, extractor))
        .collect();
    let links = read_records::<LinkRecord>(links_path)?
        .into_iter()
        .map(|(_, r)| TraceLink {
            stake_id: r.stake_id,
            sys_id: r.sys_id,
            label: r.label.map_or(LinkLabel::Unlabeled, LinkLabel::from),
            provenance: if r.label.is_some() { Provenance::Annotator } else { Provenance::Engineer },
        })
        .collect();
    Corpus::new(stakeholders, systems, links)
}

fn write_jsonl<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), CorpusError> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in rows {
        serde_json::to_writer(&mut w, &r).map_err(std::io::Error::other)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `stakeholders.jsonl`, `systems.jsonl` and `links.jsonl` into `dir`.
pub fn write_corpus(corpus: &Corpus, dir: &Path) -> Result<(), CorpusError> {
    fs::create_dir_all(dir)?;
    write_jsonl(
        &dir.join("stakeholders.jsonl"),
        corpus.stakeholders().iter().map(|s| StakeholderRecord { id: s.id.clone(), text: s.text.clone(), variation: None }),
    )?;
    write_jsonl(
        &dir.join("systems.jsonl"),
        corpus.systems().iter().map(|s| SystemRecord {
            id: s.id.clone(),
            name: s.name.clone(),
            mature: s.mature_text.clone(),
            demature: s.demature_text.clone(),
        }),
    )?;
    write_links(corpus.links(), &dir.join("links.jsonl"))
}

pub fn write_links(links: &[TraceLink], path: &Path) -> Result<(), CorpusError> {
    write_jsonl(
        path,
        links.iter().map(|l| LinkRecord { stake_id: l.stake_id.clone(), sys_id: l.sys_id.clone(), label: l.label.binary() }),
    )
}
