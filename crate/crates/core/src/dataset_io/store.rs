//! Append-only annotation store.
//!
//! A store is a dataset file set plus `annotations.log.jsonl`, one
//! [`LogRecord`] per line. Opening a store replays the log on top of the file
//! set. A partially written final line (no trailing newline) is dropped and
//! truncated away, any other malformed line is an error.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{export_dataset, load_dataset, DatasetError};
use crate::corpus::{AnnotationSpan, Dataset};

pub const LOG_FILE: &str = "annotations.log.jsonl";

/// Number of log records applied; 0 is the bare file set.
pub type Revision = u64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum LogOp {
    Append {
        span: AnnotationSpan,
    },
    /// Replaces everything one annotator placed on one output.
    Replace {
        annotator: String,
        system: String,
        segment: u32,
        spans: Vec<AnnotationSpan>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRecord {
    pub rev: Revision,
    #[serde(flatten)]
    pub op: LogOp,
}

fn apply(d: &mut Dataset, op: &LogOp) -> Result<(), DatasetError> {
    match op {
        LogOp::Append { span } => d.push_annotation(span.clone())?,
        LogOp::Replace {
            annotator,
            system,
            segment,
            spans,
        } => {
            // Validate first so a bad replacement leaves the item untouched.
            for s in spans {
                d.validate_annotation(s)?;
                if (&s.annotator, &s.system, s.segment) != (annotator, system, *segment) {
                    return Err(DatasetError::Log {
                        line: 0,
                        message: "replacement span belongs to a different item".into(),
                    });
                }
            }
            d.clear_item(annotator, system, *segment);
            for s in spans {
                d.push_annotation(s.clone())?;
            }
        }
    }
    Ok(())
}

#[derive(Debug)]
pub struct AnnotationStore {
    dir: Option<PathBuf>,
    base: Dataset,
    log: Vec<LogRecord>,
    current: Dataset,
}

impl AnnotationStore {
    /// A store that keeps its log in memory only.
    pub fn in_memory(base: Dataset) -> Self {
        Self {
            dir: None,
            current: base.clone(),
            base,
            log: Vec::new(),
        }
    }

    /// Opens a file set directory and replays its log.
    pub fn open(dir: &Path) -> Result<Self, DatasetError> {
        let base = load_dataset(dir)?;
        let mut store = Self {
            dir: Some(dir.to_owned()),
            current: base.clone(),
            base,
            log: Vec::new(),
        };
        let path = dir.join(LOG_FILE);
        if !path.exists() {
            return Ok(store);
        }
        let text = fs::read_to_string(&path).map_err(super::io_err(&path))?;
        let complete = text.rfind('\n').map_or(0, |i| i + 1);
        for (i, line) in text[..complete].lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| DatasetError::Log { line: i + 1, message };
            let rec: LogRecord = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
            let expected = store.log.len() as Revision + 1;
            if rec.rev != expected {
                return Err(bad(format!(
                    "revision {} out of sequence, expected {expected}",
                    rec.rev
                )));
            }
            apply(&mut store.current, &rec.op).map_err(|e| bad(e.to_string()))?;
            store.log.push(rec);
        }
        if complete < text.len() {
            log::warn!("dropping torn final record in {}", path.display());
            let f = OpenOptions::new()
                .write(true)
                .open(&path)
                .map_err(super::io_err(&path))?;
            f.set_len(complete as u64).map_err(super::io_err(&path))?;
        }
        Ok(store)
    }

    pub fn revision(&self) -> Revision {
        self.log.len() as Revision
    }

    pub fn log(&self) -> &[LogRecord] {
        &self.log
    }

    /// The dataset at the latest revision.
    pub fn snapshot(&self) -> &Dataset {
        &self.current
    }

    /// Rebuilds the dataset as of `rev`, or `None` if `rev` is in the future.
    pub fn snapshot_at(&self, rev: Revision) -> Option<Dataset> {
        if rev > self.revision() {
            return None;
        }
        let mut d = self.base.clone();
        for rec in &self.log[..rev as usize] {
            apply(&mut d, &rec.op).expect("logged ops were valid when written");
        }
        Some(d)
    }

    fn commit(&mut self, op: LogOp) -> Result<Revision, DatasetError> {
        let mut next = self.current.clone();
        apply(&mut next, &op)?;
        let rec = LogRecord {
            rev: self.revision() + 1,
            op,
        };
        if let Some(dir) = &self.dir {
            let path = dir.join(LOG_FILE);
            let mut line = serde_json::to_string(&rec).expect("log records serialize");
            line.push('\n');
            let mut f: File = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&path)
                .map_err(super::io_err(&path))?;
            f.write_all(line.as_bytes()).map_err(super::io_err(&path))?;
            f.sync_data().map_err(super::io_err(&path))?;
        }
        self.current = next;
        self.log.push(rec);
        Ok(self.revision())
    }

    pub fn append_annotation(&mut self, span: AnnotationSpan) -> Result<Revision, DatasetError> {
        self.commit(LogOp::Append { span })
    }

    /// Atomically replaces one annotator's spans on one output.
    pub fn replace_item(
        &mut self,
        annotator: &str,
        system: &str,
        segment: u32,
        spans: Vec<AnnotationSpan>,
    ) -> Result<Revision, DatasetError> {
        self.commit(LogOp::Replace {
            annotator: annotator.to_owned(),
            system: system.to_owned(),
            segment,
            spans,
        })
    }

    /// Writes the current snapshot as a plain file set.
    pub fn export(&self, dir: &Path) -> Result<(), DatasetError> {
        export_dataset(&self.current, dir)
    }
}
