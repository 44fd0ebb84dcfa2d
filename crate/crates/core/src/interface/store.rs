//! Append-only example store with the review queue.
//!
//! Everything lives in one JSONL event log. A review decision is a single
//! `decision` line carrying both the status change and the new labeled
//! example, so it is applied whole or not at all: a torn final line left by
//! a crash is discarded on reopen. [`ExampleStore::compact`] rewrites the log
//! through a temp file and an atomic rename.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::example_id_for;
use crate::model::{Label, LabeledExample, StakeholderRequirement, SystemRequirement, Variation};
use crate::recovery::RecoveredLink;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("review item `{0}` not found")]
    NotFound(String),
    #[error("review item `{item_id}` was already {status:?}")]
    Conflict { item_id: String, status: ReviewStatus },
    #[error("invalid filter: {0}")]
    InvalidFilter(String),
    #[error("store log {path}:{line}: {reason}")]
    Corrupt { path: String, line: usize, reason: String },
    #[error("injected fault: {0}")]
    Injected(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReviewStatus {
    Pending,
    Accepted,
    Rejected,
}

impl std::str::FromStr for ReviewStatus {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pending" => Ok(Self::Pending),
            "accepted" => Ok(Self::Accepted),
            "rejected" => Ok(Self::Rejected),
            _ => Err(format!("unknown status `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReviewDecision {
    Accept,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub item_id: String,
    pub recovered_link: RecoveredLink,
    pub explanation: String,
    pub status: ReviewStatus,
    pub decided_by: Option<String>,
    pub decided_at: Option<String>,
    pub vote_share: f64,
    pub stakeholder: StakeholderRequirement,
    pub system: SystemRequirement,
    /// The system condition block the pair was bound to.
    pub system_condition_text: String,
}

impl ReviewItem {
    pub fn from_recovered(link: RecoveredLink, stakeholder: StakeholderRequirement, system: SystemRequirement) -> Self {
        let system_condition_text = system.side_text(link.condition_side).unwrap_or_default().to_string();
        Self {
            item_id: example_id_for(&link.stake_id, &link.sys_id),
            explanation: link.verdict.explanation.clone().unwrap_or_else(|| link.verdict.raw_response.clone()),
            vote_share: link.verdict.vote_share(),
            status: ReviewStatus::Pending,
            decided_by: None,
            decided_at: None,
            recovered_link: link,
            stakeholder,
            system,
            system_condition_text,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct QueueFilter {
    pub status: Option<ReviewStatus>,
    pub variation: Option<Variation>,
    pub min_vote_share: Option<f64>,
}

impl QueueFilter {
    fn validate(&self) -> Result<(), StoreError> {
        match self.min_vote_share {
            Some(m) if !(0.0..=1.0).contains(&m) => {
                Err(StoreError::InvalidFilter(format!("min_vote_share {m} is outside [0, 1]")))
            }
            _ => Ok(()),
        }
    }

    fn matches(&self, item: &ReviewItem) -> bool {
        self.status.is_none_or(|s| item.status == s)
            && self.variation.is_none_or(|v| item.stakeholder.variation == v)
            && self.min_vote_share.is_none_or(|m| item.vote_share >= m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Page {
    pub offset: usize,
    pub limit: usize,
}

impl Default for Page {
    fn default() -> Self {
        Self { offset: 0, limit: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueuePage {
    pub items: Vec<ReviewItem>,
    pub total: usize,
    pub next_offset: Option<usize>,
}

/// Result of a successful decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionReceipt {
    pub item: ReviewItem,
    pub example: LabeledExample,
    pub store_version: u64,
}

/// Consistent view of the labeled examples.
#[derive(Debug, Clone)]
pub struct StoreSnapshot {
    pub version: u64,
    pub examples: Arc<Vec<LabeledExample>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Event {
    Example { version: u64, example: LabeledExample },
    Enqueue { item: Box<ReviewItem> },
    Decision {
        item_id: String,
        status: ReviewStatus,
        decided_by: String,
        decided_at: String,
        version: u64,
        example: LabeledExample,
    },
}

/// Where a write can be made to fail, for crash testing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultPoint {
    /// Nothing reaches the log.
    BeforeWrite,
    /// Half of the record reaches the log.
    TornWrite,
    /// The full record is durable but the in-memory state is not updated.
    AfterWrite,
}

#[derive(Default)]
struct State {
    version: u64,
    examples: Arc<Vec<LabeledExample>>,
    items: BTreeMap<String, ReviewItem>,
}

impl State {
    fn apply(&mut self, event: Event) {
        match event {
            Event::Example { version, example } => {
                Arc::make_mut(&mut self.examples).push(example);
                self.version = version;
            }
            Event::Enqueue { item } => {
                self.items.entry(item.item_id.clone()).or_insert(*item);
            }
            Event::Decision { item_id, status, decided_by, decided_at, version, example } => {
                if let Some(item) = self.items.get_mut(&item_id) {
                    item.status = status;
                    item.decided_by = Some(decided_by);
                    item.decided_at = Some(decided_at);
                }
                Arc::make_mut(&mut self.examples).push(example);
                self.version = version;
            }
        }
    }
}

pub struct ExampleStore {
    path: Option<PathBuf>,
    state: RwLock<State>,
    writer: Mutex<Option<File>>,
    fault: Mutex<Option<FaultPoint>>,
}

impl ExampleStore {
    pub fn in_memory() -> Self {
        Self { path: None, state: RwLock::new(State::default()), writer: Mutex::new(None), fault: Mutex::new(None) }
    }

    /// Opens or creates the log at `path` and replays it. A torn last line
    /// is truncated away; corruption anywhere else is an error.
    pub fn open(path: &Path) -> Result<Self, StoreError> {
        let mut state = State::default();
        if path.exists() {
            let text = fs::read(path)?;
            let mut good_len = 0usize;
            let mut offset = 0usize;
            let lines: Vec<&[u8]> = text.split_inclusive(|b| *b == b'\n').collect();
            for (i, raw) in lines.iter().enumerate() {
                offset += raw.len();
                let complete = raw.ends_with(b"\n");
                let body = String::from_utf8_lossy(raw);
                if body.trim().is_empty() {
                    good_len = offset;
                    continue;
                }
                match serde_json::from_str::<Event>(body.trim_end()) {
                    Ok(ev) if complete => {
                        state.apply(ev);
                        good_len = offset;
                    }
                    _ if i + 1 == lines.len() => {}
                    Ok(_) => unreachable!("only the last line can lack a newline"),
                    Err(e) => {
                        return Err(StoreError::Corrupt {
                            path: path.display().to_string(),
                            line: i + 1,
                            reason: e.to_string(),
                        })
                    }
                }
            }
            if good_len < text.len() {
                OpenOptions::new().write(true).open(path)?.set_len(good_len as u64)?;
            }
        } else if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            path: Some(path.to_path_buf()),
            state: RwLock::new(state),
            writer: Mutex::new(Some(file)),
            fault: Mutex::new(None),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Arms a one-shot fault for the next write.
    pub fn inject_fault(&self, point: FaultPoint) {
        *self.fault.lock().unwrap() = Some(point);
    }

    pub fn version(&self) -> u64 {
        self.state.read().unwrap().version
    }

    pub fn len(&self) -> usize {
        self.state.read().unwrap().examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn snapshot(&self) -> StoreSnapshot {
        let s = self.state.read().unwrap();
        StoreSnapshot { version: s.version, examples: s.examples.clone() }
    }

    pub fn item(&self, item_id: &str) -> Option<ReviewItem> {
        self.state.read().unwrap().items.get(item_id).cloned()
    }

    /// Writes one event and applies it. Caller holds the writer lock.
    fn commit(&self, writer: &mut Option<File>, event: Event) -> Result<(), StoreError> {
        let fault = self.fault.lock().unwrap().take();
        if let Some(file) = writer.as_mut() {
            let mut line = serde_json::to_vec(&event).map_err(std::io::Error::other)?;
            line.push(b'\n');
            match fault {
                Some(FaultPoint::BeforeWrite) => return Err(StoreError::Injected("before write")),
                Some(FaultPoint::TornWrite) => {
                    file.write_all(&line[..line.len() / 2])?;
                    file.flush()?;
                    return Err(StoreError::Injected("torn write"));
                }
                _ => {}
            }
            file.write_all(&line)?;
            file.sync_data()?;
        } else if fault == Some(FaultPoint::BeforeWrite) {
            return Err(StoreError::Injected("before write"));
        }
        if fault == Some(FaultPoint::AfterWrite) {
            return Err(StoreError::Injected("after write"));
        }
        self.state.write().unwrap().apply(event);
        Ok(())
    }

    fn unique_id(state: &State, base: &str) -> String {
        if !state.examples.iter().any(|e| e.example_id == base) {
            return base.to_string();
        }
        format!("{base}#v{}", state.version + 1)
    }

    /// Appends one labeled example and returns the new version. An id
    /// already present gets a `#v<version>` suffix so the earlier example
    /// stays untouched.
    pub fn append_example(&self, mut example: LabeledExample) -> Result<(LabeledExample, u64), StoreError> {
        let mut writer = self.writer.lock().unwrap();
        let version = {
            let s = self.state.read().unwrap();
            example.example_id = Self::unique_id(&s, &example.example_id);
            s.version + 1
        };
        self.commit(&mut writer, Event::Example { version, example: example.clone() })?;
        Ok((example, version))
    }

    /// Appends many examples, one version each.
    pub fn append_examples(&self, examples: impl IntoIterator<Item = LabeledExample>) -> Result<u64, StoreError> {
        let mut v = self.version();
        for e in examples {
            v = self.append_example(e)?.1;
        }
        Ok(v)
    }

    /// Adds review items; ids already queued are left alone. Returns how many were new.
    pub fn enqueue(&self, items: impl IntoIterator<Item = ReviewItem>) -> Result<usize, StoreError> {
        let mut writer = self.writer.lock().unwrap();
        let mut added = 0;
        for item in items {
            if self.state.read().unwrap().items.contains_key(&item.item_id) {
                continue;
            }
            self.commit(&mut writer, Event::Enqueue { item: Box::new(item) })?;
            added += 1;
        }
        Ok(added)
    }

    /// Accept appends the pair as Valid, Reject as Invalid. Each item can be
    /// decided once.
    pub fn record_review_decision(
        &self,
        item_id: &str,
        decision: ReviewDecision,
        reviewer: &str,
    ) -> Result<DecisionReceipt, StoreError> {
        let mut writer = self.writer.lock().unwrap();
        let (event, example, version) = {
            let s = self.state.read().unwrap();
            let item = s.items.get(item_id).ok_or_else(|| StoreError::NotFound(item_id.to_string()))?;
            if item.status != ReviewStatus::Pending {
                return Err(StoreError::Conflict { item_id: item_id.to_string(), status: item.status });
            }
            let (status, label) = match decision {
                ReviewDecision::Accept => (ReviewStatus::Accepted, Label::Valid),
                ReviewDecision::Reject => (ReviewStatus::Rejected, Label::Invalid),
            };
            let example = LabeledExample {
                example_id: Self::unique_id(&s, item_id),
                stakeholder: item.stakeholder.clone(),
                system: item.system.clone(),
                label,
            };
            let version = s.version + 1;
            let event = Event::Decision {
                item_id: item_id.to_string(),
                status,
                decided_by: reviewer.to_string(),
                decided_at: chrono::Utc::now().to_rfc3339(),
                version,
                example: example.clone(),
            };
            (event, example, version)
        };
        self.commit(&mut writer, event)?;
        let item = self.item(item_id).expect("decided item exists");
        Ok(DecisionReceipt { item, example, store_version: version })
    }

    /// Items matching `filter`, by descending vote share then item id.
    pub fn list_review_queue(&self, filter: &QueueFilter, page: Page) -> Result<QueuePage, StoreError> {
        filter.validate()?;
        let s = self.state.read().unwrap();
        let mut items: Vec<&ReviewItem> = s.items.values().filter(|i| filter.matches(i)).collect();
        items.sort_by(|a, b| b.vote_share.total_cmp(&a.vote_share).then_with(|| a.item_id.cmp(&b.item_id)));
        let total = items.len();
        let end = page.offset.saturating_add(page.limit).min(total);
        let start = page.offset.min(total);
        Ok(QueuePage {
            items: items[start..end].iter().map(|i| (*i).clone()).collect(),
            total,
            next_offset: (end < total).then_some(end),
        })
    }

    /// Rewrites the log as the minimal event sequence for the current
    /// state, via a temp file and an atomic rename.
    pub fn compact(&self) -> Result<(), StoreError> {
        let Some(path) = &self.path else { return Ok(()) };
        let mut writer = self.writer.lock().unwrap();
        let s = self.state.read().unwrap();
        let tmp = path.with_extension("compact.tmp");
        {
            let mut f = File::create(&tmp)?;
            let base = s.version - s.examples.len() as u64;
            for (i, e) in s.examples.iter().enumerate() {
                let ev = Event::Example { version: base + i as u64 + 1, example: e.clone() };
                f.write_all(&serde_json::to_vec(&ev).map_err(std::io::Error::other)?)?;
                f.write_all(b"\n")?;
            }
            for item in s.items.values() {
                let ev = Event::Enqueue { item: Box::new(item.clone()) };
                f.write_all(&serde_json::to_vec(&ev).map_err(std::io::Error::other)?)?;
                f.write_all(b"\n")?;
            }
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        *writer = Some(OpenOptions::new().append(true).open(path)?);
        Ok(())
    }
}
