//! On-disk dataset file sets.
//!
//! A dataset directory holds:
//!
//! | file                | content                                             |
//! |---------------------|-----------------------------------------------------|
//! | `manifest.json`     | name, taxonomy name/version, registries, checksums  |
//! | `taxonomy.tax`      | taxonomy definition                                 |
//! | `segments.jsonl`    | `{"id", "source", "reference"}` per line            |
//! | `outputs.jsonl`     | `{"system", "segment", "text"}` per line            |
//! | `annotations.jsonl` | one [`AnnotationSpan`] per line                     |
//!
//! Exports are byte-deterministic. Every data file's SHA-256 is recorded in
//! the manifest and verified on load.

mod import;
mod store;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{AnnotationSpan, CorpusError, Dataset, Segment, SystemOutput};
use crate::taxonomy::{parse_taxonomy, TaxonomyError};

pub use import::{import_annotations, resolve_category, FlatTableAdapter, ImportAdapter, ImportError};
pub use store::{AnnotationStore, LogOp, LogRecord, Revision, LOG_FILE};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TAXONOMY_FILE: &str = "taxonomy.tax";
pub const SEGMENTS_FILE: &str = "segments.jsonl";
pub const OUTPUTS_FILE: &str = "outputs.jsonl";
pub const ANNOTATIONS_FILE: &str = "annotations.jsonl";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file} line {line}: {message}")]
    Schema { file: String, line: usize, message: String },
    #[error("checksum mismatch for {file}: manifest has {expected}, file hashes to {actual}")]
    Checksum {
        file: String,
        expected: String,
        actual: String,
    },
    #[error("manifest expects taxonomy {expected}, taxonomy file declares {found}")]
    TaxonomyVersion { expected: String, found: String },
    #[error("taxonomy: {0}")]
    Taxonomy(#[from] TaxonomyError),
    #[error("{file} line {line}: {source}")]
    Integrity {
        file: String,
        line: usize,
        #[source]
        source: CorpusError,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("store log line {line}: {message}")]
    Log { line: usize, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_owned(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyRef {
    pub name: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub taxonomy: TaxonomyRef,
    pub annotators: Vec<String>,
    pub systems: Vec<String>,
    pub files: ManifestFiles,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestFiles {
    pub taxonomy: FileEntry,
    pub segments: FileEntry,
    pub outputs: FileEntry,
    pub annotations: FileEntry,
}

#[derive(Serialize, Deserialize)]
struct OutputRecord {
    system: String,
    segment: u32,
    text: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn jsonl<T: Serialize>(records: impl IntoIterator<Item = T>) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(&r).expect("records serialize"));
        out.push('\n');
    }
    out
}

/// The file contents of an exported dataset, keyed by file name, in a stable
/// order (manifest last).
pub fn render_file_set(d: &Dataset) -> Vec<(&'static str, String)> {
    let taxonomy = d.taxonomy().to_text();
    let segments = jsonl(d.segments());
    let outputs = jsonl(d.outputs().iter().map(|o| OutputRecord {
        system: o.system.clone(),
        segment: o.segment,
        text: o.text.clone(),
    }));
    let annotations = jsonl(d.annotations());
    let entry = |path: &str, body: &str| FileEntry {
        path: path.to_owned(),
        sha256: sha256_hex(body.as_bytes()),
    };
    let manifest = Manifest {
        name: d.name().to_owned(),
        taxonomy: TaxonomyRef {
            name: d.taxonomy().name().to_owned(),
            version: d.taxonomy().version().to_owned(),
        },
        annotators: d.annotators().to_vec(),
        systems: d.systems().to_vec(),
        files: ManifestFiles {
            taxonomy: entry(TAXONOMY_FILE, &taxonomy),
            segments: entry(SEGMENTS_FILE, &segments),
            outputs: entry(OUTPUTS_FILE, &outputs),
            annotations: entry(ANNOTATIONS_FILE, &annotations),
        },
    };
    let mut manifest_text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    manifest_text.push('\n');
    vec![
        (TAXONOMY_FILE, taxonomy),
        (SEGMENTS_FILE, segments),
        (OUTPUTS_FILE, outputs),
        (ANNOTATIONS_FILE, annotations),
        (MANIFEST_FILE, manifest_text),
    ]
}

/// Writes `d` as a file set under `dir`, creating the directory if needed.
pub fn export_dataset(d: &Dataset, dir: &Path) -> Result<(), DatasetError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (name, body) in render_file_set(d) {
        let path = dir.join(name);
        fs::write(&path, body).map_err(io_err(&path))?;
    }
    Ok(())
}

fn read_file(dir: &Path, name: &str) -> Result<String, DatasetError> {
    let path = dir.join(name);
    if !path.exists() {
        return Err(DatasetError::MissingFile(path));
    }
    fs::read_to_string(&path).map_err(io_err(&path))
}

fn parse_lines<T: for<'de> Deserialize<'de>>(file: &str, text: &str) -> Result<Vec<(usize, T)>, DatasetError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map(|v| (i + 1, v))
                .map_err(|e| DatasetError::Schema {
                    file: file.to_owned(),
                    line: i + 1,
                    message: e.to_string(),
                })
        })
        .collect()
}

/// Loads and validates a dataset file set.
pub fn load_dataset(dir: &Path) -> Result<Dataset, DatasetError> {
    let manifest_text = read_file(dir, MANIFEST_FILE)?;
    let manifest: Manifest = serde_json::from_str(&manifest_text).map_err(|e| DatasetError::Schema {
        file: MANIFEST_FILE.to_owned(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let load = |entry: &FileEntry| -> Result<String, DatasetError> {
        let body = read_file(dir, &entry.path)?;
        let actual = sha256_hex(body.as_bytes());
        if !actual.eq_ignore_ascii_case(&entry.sha256) {
            return Err(DatasetError::Checksum {
                file: entry.path.clone(),
                expected: entry.sha256.clone(),
                actual,
            });
        }
        Ok(body)
    };

    let taxonomy = parse_taxonomy(&load(&manifest.files.taxonomy)?)?;
    if taxonomy.name() != manifest.taxonomy.name || taxonomy.version() != manifest.taxonomy.version {
        return Err(DatasetError::TaxonomyVersion {
            expected: format!("{}@{}", manifest.taxonomy.name, manifest.taxonomy.version),
            found: format!("{}@{}", taxonomy.name(), taxonomy.version()),
        });
    }
    let segments: Vec<Segment> = parse_lines(SEGMENTS_FILE, &load(&manifest.files.segments)?)?
        .into_iter()
        .map(|(_, s)| s)
        .collect();
    let outputs: Vec<(usize, OutputRecord)> = parse_lines(OUTPUTS_FILE, &load(&manifest.files.outputs)?)?;
    let annotations: Vec<(usize, AnnotationSpan)> = parse_lines(ANNOTATIONS_FILE, &load(&manifest.files.annotations)?)?;

    // Annotations are added one by one afterwards so errors name their line.
    let output_line = |system: &str, segment: u32| {
        outputs
            .iter()
            .filter(|(_, o)| o.system == system && o.segment == segment)
            .map(|(l, _)| *l)
            .next_back()
            .unwrap_or(0)
    };
    let outs = outputs
        .iter()
        .map(|(_, o)| SystemOutput::new(o.system.clone(), o.segment, o.text.clone()))
        .collect();
    let mut d = Dataset::new(
        manifest.name,
        Arc::new(taxonomy),
        manifest.annotators,
        manifest.systems,
        segments,
        outs,
        Vec::new(),
    )
    .map_err(|source| {
        let line = match &source {
            CorpusError::DuplicateOutput { system, segment }
            | CorpusError::OutputWithoutSegment { system, segment } => output_line(system, *segment),
            CorpusError::UnknownSystem(system) => {
                outputs.iter().find(|(_, o)| &o.system == system).map_or(0, |(l, _)| *l)
            }
            _ => return DatasetError::Corpus(source),
        };
        DatasetError::Integrity {
            file: OUTPUTS_FILE.to_owned(),
            line,
            source,
        }
    })?;
    for (line, a) in annotations {
        d.push_annotation(a).map_err(|source| DatasetError::Integrity {
            file: ANNOTATIONS_FILE.to_owned(),
            line,
            source,
        })?;
    }
    Ok(d)
}
