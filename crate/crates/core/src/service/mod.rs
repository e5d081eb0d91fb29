//! Blind annotation sessions.
//!
//! A session walks one annotator through every segment of a dataset. For
//! each segment the system outputs are shown under opaque slot labels
//! (`A`, `B`, ...) in an order drawn from a seeded ChaCha stream, so the same
//! seed always yields the same assignment. Slot labels are mapped back to
//! system ids only inside this module; nothing returned to the client names a
//! system.
//!
//! Sessions live in memory. Annotations go through the dataset's
//! [`AnnotationStore`], which is the only durable state.

mod http;

use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AnnotationSpan, CorpusError, TokenSpan};
use crate::dataset_io::{render_file_set, AnnotationStore, DatasetError, Revision};
use crate::scope::ScopeLabel;
use crate::taxonomy::TaxonomyTree;

pub use http::{router, ServiceConfig};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),
    #[error("annotator `{0}` is not registered for this dataset")]
    UnknownAnnotator(String),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("segment {0} is not part of this session")]
    UnknownSegment(u32),
    #[error("slot `{0}` does not exist for this segment")]
    UnknownSlot(String),
    #[error("segment {0} has not been reached yet")]
    NotReached(u32),
    #[error("session has {remaining} segments left to annotate")]
    Incomplete { remaining: usize },
    #[error("session is already complete")]
    AlreadyComplete,
    #[error("span {index}: {message}")]
    InvalidSpan { index: usize, message: String },
    #[error("no existing span matches scope update {index}")]
    NoSuchSpan { index: usize },
    #[error("storage failure: {0}")]
    Storage(String),
}

impl ServiceError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::UnknownDataset(_) => "unknown_dataset",
            ServiceError::UnknownAnnotator(_) => "unknown_annotator",
            ServiceError::UnknownSession(_) => "unknown_session",
            ServiceError::UnknownSegment(_) => "unknown_segment",
            ServiceError::UnknownSlot(_) => "unknown_slot",
            ServiceError::NotReached(_) => "segment_not_reached",
            ServiceError::Incomplete { .. } => "session_incomplete",
            ServiceError::AlreadyComplete => "session_complete",
            ServiceError::InvalidSpan { .. } => "invalid_span",
            ServiceError::NoSuchSpan { .. } => "no_such_span",
            ServiceError::Storage(_) => "storage_failure",
        }
    }
}

/// Describes a validation failure without naming the underlying system.
fn blind_message(e: &CorpusError) -> String {
    match e {
        CorpusError::UnknownOutput { .. } | CorpusError::UnknownSystem(_) => "this slot has no output".to_owned(),
        other => other.to_string(),
    }
}

pub fn slot_label(i: usize) -> String {
    let mut n = i;
    let mut s = Vec::new();
    loop {
        s.push(b'A' + (n % 26) as u8);
        if n < 26 {
            break;
        }
        n = n / 26 - 1;
    }
    s.reverse();
    String::from_utf8(s).expect("ASCII")
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Hidden slot order for one segment: `systems[k]` is shown as slot `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentAssignment {
    pub segment: u32,
    pub systems: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct AnnotationSession {
    pub id: String,
    pub annotator: String,
    pub dataset: String,
    pub seed: u64,
    pub assignments: Vec<SegmentAssignment>,
    /// Index of the first segment with an unsubmitted slot.
    pub cursor: usize,
    submitted: Vec<BTreeSet<usize>>,
    pub completed: bool,
    pub created: u64,
    pub updated: u64,
}

impl AnnotationSession {
    fn position(&self, segment: u32) -> Result<usize, ServiceError> {
        self.assignments
            .iter()
            .position(|a| a.segment == segment)
            .ok_or(ServiceError::UnknownSegment(segment))
    }

    fn slot(&self, pos: usize, label: &str) -> Result<(usize, &str), ServiceError> {
        let systems = &self.assignments[pos].systems;
        (0..systems.len())
            .find(|&k| slot_label(k) == label)
            .map(|k| (k, systems[k].as_str()))
            .ok_or_else(|| ServiceError::UnknownSlot(label.to_owned()))
    }

    fn advance(&mut self) {
        while self.cursor < self.assignments.len()
            && self.submitted[self.cursor].len() == self.assignments[self.cursor].systems.len()
        {
            self.cursor += 1;
        }
    }

    pub fn is_finished(&self) -> bool {
        self.cursor >= self.assignments.len()
    }
}

/// Draws the per-segment slot orders for `seed`.
pub fn assign_slots(seed: u64, segments: &[(u32, Vec<String>)]) -> Vec<SegmentAssignment> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    segments
        .iter()
        .map(|(segment, systems)| {
            let mut systems = systems.clone();
            systems.shuffle(&mut rng);
            SegmentAssignment {
                segment: *segment,
                systems,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub annotator: String,
    pub dataset: String,
    pub seed: u64,
    pub segments: usize,
    pub position: usize,
    pub created: u64,
    pub updated: u64,
    pub taxonomy: TaxonomyTree,
}

/// A span as the client sees it: no annotator, system, or segment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotSpan {
    pub category: String,
    pub span: TokenSpan,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scope: Option<ScopeLabel>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotView {
    pub slot: String,
    pub text: String,
    pub tokens: Vec<String>,
    /// Spans this annotator already stored for the slot.
    pub spans: Vec<SlotSpan>,
    pub submitted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemBundle {
    pub session_id: String,
    pub segment: u32,
    pub position: usize,
    pub total: usize,
    pub source: String,
    pub reference: String,
    pub slots: Vec<SlotView>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NextItem {
    Item(ItemBundle),
    Complete { session_id: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmitAck {
    pub session_id: String,
    pub segment: u32,
    pub slot: String,
    pub stored: usize,
    pub revision: Revision,
    pub position: usize,
    pub finished: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScopeUpdate {
    pub category: String,
    pub span: TokenSpan,
    /// `None` removes the label.
    pub scope: Option<ScopeLabel>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionSummary {
    pub session_id: String,
    pub annotator: String,
    pub segments: usize,
    pub items: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportBundle {
    pub dataset: String,
    pub revision: Revision,
    /// File name to content, in export order.
    pub files: Vec<(String, String)>,
}

/// Datasets and live sessions. Cheap to share behind an `Arc`.
#[derive(Default)]
pub struct SessionService {
    datasets: RwLock<HashMap<String, Arc<Mutex<AnnotationStore>>>>,
    sessions: RwLock<HashMap<String, Arc<Mutex<AnnotationSession>>>>,
}

fn poisoned<T>(_: T) -> ServiceError {
    ServiceError::Storage("lock poisoned by an earlier panic".into())
}

impl SessionService {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a store under `id`, replacing any previous one.
    pub fn add_dataset(&self, id: impl Into<String>, store: AnnotationStore) {
        self.datasets
            .write()
            .expect("dataset registry lock")
            .insert(id.into(), Arc::new(Mutex::new(store)));
    }

    pub fn dataset_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .datasets
            .read()
            .expect("dataset registry lock")
            .keys()
            .cloned()
            .collect();
        ids.sort();
        ids
    }

    fn store(&self, id: &str) -> Result<Arc<Mutex<AnnotationStore>>, ServiceError> {
        self.datasets
            .read()
            .map_err(poisoned)?
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownDataset(id.to_owned()))
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<AnnotationSession>>, ServiceError> {
        self.sessions
            .read()
            .map_err(poisoned)?
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(id.to_owned()))
    }

    pub fn create_session(&self, annotator: &str, dataset: &str, seed: u64) -> Result<SessionInfo, ServiceError> {
        let store = self.store(dataset)?;
        let store = store.lock().map_err(poisoned)?;
        let d = store.snapshot();
        if !d.annotators().iter().any(|a| a == annotator) {
            return Err(ServiceError::UnknownAnnotator(annotator.to_owned()));
        }
        let segments: Vec<(u32, Vec<String>)> = d
            .segments()
            .iter()
            .map(|s| {
                let systems = d
                    .systems()
                    .iter()
                    .filter(|sys| d.output(sys, s.id).is_some())
                    .cloned()
                    .collect();
                (s.id, systems)
            })
            .collect();
        let assignments = assign_slots(seed, &segments);
        let t = now();
        let mut session = AnnotationSession {
            id: uuid::Uuid::new_v4().to_string(),
            annotator: annotator.to_owned(),
            dataset: dataset.to_owned(),
            seed,
            submitted: vec![BTreeSet::new(); assignments.len()],
            assignments,
            cursor: 0,
            completed: false,
            created: t,
            updated: t,
        };
        session.advance();
        let info = SessionInfo {
            session_id: session.id.clone(),
            annotator: session.annotator.clone(),
            dataset: session.dataset.clone(),
            seed,
            segments: session.assignments.len(),
            position: session.cursor,
            created: t,
            updated: t,
            taxonomy: d.taxonomy().to_tree(),
        };
        log::info!("session {} opened for {annotator} on {dataset}", session.id);
        self.sessions
            .write()
            .map_err(poisoned)?
            .insert(session.id.clone(), Arc::new(Mutex::new(session)));
        Ok(info)
    }

    /// Hidden assignment of a session, for auditing and tests.
    pub fn assignments(&self, session: &str) -> Result<Vec<SegmentAssignment>, ServiceError> {
        Ok(self.session(session)?.lock().map_err(poisoned)?.assignments.clone())
    }

    fn bundle(&self, s: &AnnotationSession, pos: usize) -> Result<ItemBundle, ServiceError> {
        let store = self.store(&s.dataset)?;
        let store = store.lock().map_err(poisoned)?;
        let d = store.snapshot();
        let a = &s.assignments[pos];
        let seg = d.segment(a.segment).ok_or(ServiceError::UnknownSegment(a.segment))?;
        let slots = a
            .systems
            .iter()
            .enumerate()
            .map(|(k, sys)| {
                let out = d
                    .output(sys, a.segment)
                    .expect("assignments only list existing outputs");
                let spans = d
                    .annotations()
                    .iter()
                    .filter(|x| x.annotator == s.annotator && &x.system == sys && x.segment == a.segment)
                    .map(|x| SlotSpan {
                        category: x.category.clone(),
                        span: x.span,
                        scope: x.scope,
                    })
                    .collect();
                SlotView {
                    slot: slot_label(k),
                    text: out.text.clone(),
                    tokens: out.tokens().to_vec(),
                    spans,
                    submitted: s.submitted[pos].contains(&k),
                }
            })
            .collect();
        Ok(ItemBundle {
            session_id: s.id.clone(),
            segment: a.segment,
            position: pos,
            total: s.assignments.len(),
            source: seg.source.clone(),
            reference: seg.reference.clone(),
            slots,
        })
    }

    pub fn next_item(&self, session: &str) -> Result<NextItem, ServiceError> {
        let s = self.session(session)?;
        let s = s.lock().map_err(poisoned)?;
        if s.is_finished() {
            return Ok(NextItem::Complete {
                session_id: s.id.clone(),
            });
        }
        Ok(NextItem::Item(self.bundle(&s, s.cursor)?))
    }

    /// Any segment the session has already reached, for revisits.
    pub fn item(&self, session: &str, segment: u32) -> Result<ItemBundle, ServiceError> {
        let s = self.session(session)?;
        let s = s.lock().map_err(poisoned)?;
        let pos = s.position(segment)?;
        if pos > s.cursor {
            return Err(ServiceError::NotReached(segment));
        }
        self.bundle(&s, pos)
    }

    /// Replaces this annotator's spans for one slot. An empty list clears it.
    pub fn submit_spans(
        &self,
        session: &str,
        segment: u32,
        slot: &str,
        spans: Vec<SlotSpan>,
    ) -> Result<SubmitAck, ServiceError> {
        let s = self.session(session)?;
        let mut s = s.lock().map_err(poisoned)?;
        if s.completed {
            return Err(ServiceError::AlreadyComplete);
        }
        let pos = s.position(segment)?;
        if pos > s.cursor {
            return Err(ServiceError::NotReached(segment));
        }
        let (k, system) = s.slot(pos, slot)?;
        let system = system.to_owned();
        let spans: Vec<AnnotationSpan> = spans
            .into_iter()
            .map(|x| AnnotationSpan {
                annotator: s.annotator.clone(),
                system: system.clone(),
                segment,
                category: x.category,
                span: x.span,
                scope: x.scope,
            })
            .collect();
        let stored = spans.len();

        let store = self.store(&s.dataset)?;
        let mut store = store.lock().map_err(poisoned)?;
        for (index, a) in spans.iter().enumerate() {
            store
                .snapshot()
                .validate_annotation(a)
                .map_err(|e| ServiceError::InvalidSpan {
                    index,
                    message: blind_message(&e),
                })?;
        }
        let revision = store
            .replace_item(&s.annotator, &system, segment, spans)
            .map_err(|e| ServiceError::Storage(e.to_string()))?;
        drop(store);

        s.submitted[pos].insert(k);
        s.advance();
        s.updated = now();
        Ok(SubmitAck {
            session_id: s.id.clone(),
            segment,
            slot: slot.to_owned(),
            stored,
            revision,
            position: s.cursor,
            finished: s.is_finished(),
        })
    }

    /// Sets or clears scope labels on spans already stored for one slot,
    /// matched by category and token span.
    pub fn revise_scopes(
        &self,
        session: &str,
        segment: u32,
        slot: &str,
        updates: Vec<ScopeUpdate>,
    ) -> Result<SubmitAck, ServiceError> {
        let current = {
            let s = self.session(session)?;
            let s = s.lock().map_err(poisoned)?;
            let pos = s.position(segment)?;
            if pos > s.cursor {
                return Err(ServiceError::NotReached(segment));
            }
            let (_, system) = s.slot(pos, slot)?;
            let store = self.store(&s.dataset)?;
            let store = store.lock().map_err(poisoned)?;
            store
                .snapshot()
                .annotations()
                .iter()
                .filter(|x| x.annotator == s.annotator && x.system == system && x.segment == segment)
                .map(|x| SlotSpan {
                    category: x.category.clone(),
                    span: x.span,
                    scope: x.scope,
                })
                .collect::<Vec<_>>()
        };
        let mut revised = current;
        for (index, u) in updates.into_iter().enumerate() {
            let mut hit = false;
            for x in revised
                .iter_mut()
                .filter(|x| x.category == u.category && x.span == u.span)
            {
                x.scope = u.scope;
                hit = true;
            }
            if !hit {
                return Err(ServiceError::NoSuchSpan { index });
            }
        }
        self.submit_spans(session, segment, slot, revised)
    }

    pub fn complete(&self, session: &str) -> Result<CompletionSummary, ServiceError> {
        let s = self.session(session)?;
        let mut s = s.lock().map_err(poisoned)?;
        if !s.is_finished() {
            return Err(ServiceError::Incomplete {
                remaining: s.assignments.len() - s.cursor,
            });
        }
        s.completed = true;
        s.updated = now();
        Ok(CompletionSummary {
            session_id: s.id.clone(),
            annotator: s.annotator.clone(),
            segments: s.assignments.len(),
            items: s.assignments.iter().map(|a| a.systems.len()).sum(),
        })
    }

    pub fn export(&self, dataset: &str) -> Result<ExportBundle, ServiceError> {
        let store = self.store(dataset)?;
        let store = store.lock().map_err(poisoned)?;
        Ok(ExportBundle {
            dataset: dataset.to_owned(),
            revision: store.revision(),
            files: render_file_set(store.snapshot())
                .into_iter()
                .map(|(name, body)| (name.to_owned(), body))
                .collect(),
        })
    }

    /// Writes a dataset's current snapshot to disk.
    pub fn export_to(&self, dataset: &str, dir: &std::path::Path) -> Result<(), ServiceError> {
        let store = self.store(dataset)?;
        let store = store.lock().map_err(poisoned)?;
        store
            .export(dir)
            .map_err(|e: DatasetError| ServiceError::Storage(e.to_string()))
    }
}
