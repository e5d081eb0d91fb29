//! Importers for annotation exports produced by other tools.
//!
//! Each source format gets its own [`ImportAdapter`]. Adapters only map rows
//! onto [`AnnotationSpan`]s; validation against the target dataset happens in
//! [`import_annotations`], so an unknown category or out-of-range span stops
//! the import with the offending row number.

use thiserror::Error;

use crate::corpus::{AnnotationSpan, CorpusError, Dataset, TokenSpan};
use crate::taxonomy::{slugify, Taxonomy};

#[derive(Debug, Error)]
pub enum ImportError {
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("row {row}: category `{label}` does not resolve to a unique taxonomy category")]
    UnknownCategory { row: usize, label: String },
    #[error("row {row}: {source}")]
    Invalid {
        row: usize,
        #[source]
        source: CorpusError,
    },
}

pub trait ImportAdapter {
    fn name(&self) -> &'static str;

    /// Returns `(row number, span)` pairs. Row numbers are 1-based and count
    /// the header line.
    fn parse(&self, text: &str, taxonomy: &Taxonomy) -> Result<Vec<(usize, AnnotationSpan)>, ImportError>;
}

/// Delimited table with one span per row.
///
/// Required columns: `annotator`, `system`, `segment`, `category`, `start`,
/// `end`, optional `scope`. A phantom span is written as `start` = `phantom`
/// with an empty `end`. `category` is either a taxonomy id or a display path
/// such as `Agreement_Number` or `Fluency/Grammar/Word order`.
#[derive(Debug, Clone, Copy)]
pub struct FlatTableAdapter {
    pub delimiter: u8,
}

impl FlatTableAdapter {
    pub const CSV: FlatTableAdapter = FlatTableAdapter { delimiter: b',' };
    pub const TSV: FlatTableAdapter = FlatTableAdapter { delimiter: b'\t' };
}

/// Maps a category label to a taxonomy id: exact id first, then a suffix
/// match on slugged path components.
pub fn resolve_category(taxonomy: &Taxonomy, label: &str) -> Option<String> {
    let label = label.trim();
    if taxonomy.contains(label) {
        return Some(label.to_owned());
    }
    let wanted: Vec<String> = label
        .split(['_', '/', '>', '.'])
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(slugify)
        .collect();
    if wanted.is_empty() {
        return None;
    }
    let mut hits = taxonomy.categories().iter().filter(|c| {
        let parts: Vec<&str> = c.id.split('.').collect();
        parts.len() >= wanted.len() && parts[parts.len() - wanted.len()..] == wanted
    });
    match (hits.next(), hits.next()) {
        (Some(c), None) => Some(c.id.clone()),
        _ => None,
    }
}

impl ImportAdapter for FlatTableAdapter {
    fn name(&self) -> &'static str {
        if self.delimiter == b'\t' {
            "tsv"
        } else {
            "csv"
        }
    }

    fn parse(&self, text: &str, taxonomy: &Taxonomy) -> Result<Vec<(usize, AnnotationSpan)>, ImportError> {
        let mut rdr = csv::ReaderBuilder::new()
            .delimiter(self.delimiter)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = rdr
            .headers()
            .map_err(|e| ImportError::Row {
                row: 1,
                message: e.to_string(),
            })?
            .clone();
        let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
        let need = |name: &str| {
            col(name).ok_or_else(|| ImportError::Row {
                row: 1,
                message: format!("missing column `{name}`"),
            })
        };
        let (ai, si, gi, ci, bi, ei) = (
            need("annotator")?,
            need("system")?,
            need("segment")?,
            need("category")?,
            need("start")?,
            need("end")?,
        );
        let scope_col = col("scope");

        let mut out = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| ImportError::Row {
                row: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })?;
            let row = rec.position().map_or(0, |p| p.line() as usize);
            let f = |i: usize| rec.get(i).unwrap_or("");
            let bad = |message: String| ImportError::Row { row, message };
            let int = |i: usize, what: &str| {
                f(i).parse::<usize>()
                    .map_err(|_| bad(format!("`{}` is not a valid {what}", f(i))))
            };
            let label = f(ci);
            let category = resolve_category(taxonomy, label).ok_or_else(|| ImportError::UnknownCategory {
                row,
                label: label.to_owned(),
            })?;
            let span = if f(bi).eq_ignore_ascii_case("phantom") {
                TokenSpan::Phantom
            } else {
                TokenSpan::Range {
                    start: int(bi, "start")?,
                    end: int(ei, "end")?,
                }
            };
            let segment = f(gi)
                .parse::<u32>()
                .map_err(|_| bad(format!("`{}` is not a valid segment id", f(gi))))?;
            let mut a = AnnotationSpan::new(f(ai), f(si), segment, category, span);
            if let Some(s) = scope_col.map(f).filter(|s| !s.is_empty()) {
                a.scope = Some(s.parse().map_err(|e: crate::scope::ScopeError| bad(e.to_string()))?);
            }
            out.push((row, a));
        }
        Ok(out)
    }
}

/// Parses `text` with `adapter` and adds every span to a copy of `d`.
pub fn import_annotations(d: &Dataset, adapter: &dyn ImportAdapter, text: &str) -> Result<Dataset, ImportError> {
    let spans = adapter.parse(text, d.taxonomy())?;
    let mut out = d.clone();
    for (row, a) in spans {
        out.push_annotation(a)
            .map_err(|source| ImportError::Invalid { row, source })?;
    }
    log::info!(
        "imported {} rows with the {} adapter",
        out.annotations().len() - d.annotations().len(),
        adapter.name()
    );
    Ok(out)
}
