//! Sentence-level inter-annotator agreement (Cohen's kappa).
//!
//! Each item is one system output of one segment. An annotator labels an item
//! "present" for a category when they placed at least one matching span on
//! it, so disagreement about span boundaries does not count against them.

use serde::Serialize;
use thiserror::Error;

use crate::corpus::{CategoryFilter, CorpusError, Dataset};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IaaError {
    #[error("agreement needs exactly two annotators, dataset has {0}")]
    AnnotatorCount(usize),
    #[error("label matrix is empty")]
    Empty,
    #[error("label vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabelItem {
    pub segment: u32,
    pub system: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
}

/// Binary presence labels of two annotators over the same items.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SentenceLabelMatrix {
    pub items: Vec<LabelItem>,
    pub labels_a: Vec<bool>,
    pub labels_b: Vec<bool>,
}

impl SentenceLabelMatrix {
    pub fn from_labels(labels_a: Vec<bool>, labels_b: Vec<bool>) -> Result<Self, IaaError> {
        if labels_a.len() != labels_b.len() {
            return Err(IaaError::LengthMismatch(labels_a.len(), labels_b.len()));
        }
        let items = (0..labels_a.len())
            .map(|i| LabelItem {
                segment: i as u32,
                system: String::new(),
                category: None,
            })
            .collect();
        Ok(Self {
            items,
            labels_a,
            labels_b,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    fn extend(&mut self, other: SentenceLabelMatrix) {
        self.items.extend(other.items);
        self.labels_a.extend(other.labels_a);
        self.labels_b.extend(other.labels_b);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KappaResult {
    /// `None` when expected agreement is 1 (both annotators constant and equal).
    pub kappa: Option<f64>,
    pub observed: f64,
    pub expected: f64,
    pub items: usize,
}

impl KappaResult {
    pub fn is_computable(&self) -> bool {
        self.kappa.is_some()
    }
}

fn two_annotators(d: &Dataset) -> Result<(&str, &str), IaaError> {
    match d.annotators() {
        [a, b] => Ok((a, b)),
        other => Err(IaaError::AnnotatorCount(other.len())),
    }
}

/// One item per existing `(segment, system)` output of `systems`, in system
/// then segment order.
pub fn derive_sentence_labels(
    d: &Dataset,
    filter: &CategoryFilter,
    systems: &[&str],
) -> Result<SentenceLabelMatrix, IaaError> {
    let (a, b) = two_annotators(d)?;
    if let CategoryFilter::Category { id, .. } = filter {
        if !d.taxonomy().contains(id) {
            return Err(CorpusError::UnknownCategory(id.clone()).into());
        }
    }
    let mut m = SentenceLabelMatrix {
        items: Vec::new(),
        labels_a: Vec::new(),
        labels_b: Vec::new(),
    };
    for &sys in systems {
        if !d.systems().iter().any(|s| s == sys) {
            return Err(CorpusError::UnknownSystem(sys.to_owned()).into());
        }
        let tagged = |who: &str, seg: u32| {
            d.annotations().iter().any(|x| {
                x.annotator == who && x.system == sys && x.segment == seg && filter.matches(d.taxonomy(), &x.category)
            })
        };
        for seg in d.segments() {
            if d.output(sys, seg.id).is_none() {
                continue;
            }
            m.items.push(LabelItem {
                segment: seg.id,
                system: sys.to_owned(),
                category: match filter {
                    CategoryFilter::Any => None,
                    CategoryFilter::Category { id, .. } => Some(id.clone()),
                },
            });
            m.labels_a.push(tagged(a, seg.id));
            m.labels_b.push(tagged(b, seg.id));
        }
    }
    Ok(m)
}

/// Cohen's kappa over two binary label vectors.
pub fn cohens_kappa(m: &SentenceLabelMatrix) -> Result<KappaResult, IaaError> {
    if m.labels_a.len() != m.labels_b.len() {
        return Err(IaaError::LengthMismatch(m.labels_a.len(), m.labels_b.len()));
    }
    let n = m.labels_a.len();
    if n == 0 {
        return Err(IaaError::Empty);
    }
    // 2x2 confusion counts: [a][b]
    let mut c = [[0u64; 2]; 2];
    for (&x, &y) in m.labels_a.iter().zip(&m.labels_b) {
        c[x as usize][y as usize] += 1;
    }
    let nf = n as f64;
    let observed = (c[0][0] + c[1][1]) as f64 / nf;
    let a_pos = (c[1][0] + c[1][1]) as f64;
    let b_pos = (c[0][1] + c[1][1]) as f64;
    let expected = (a_pos * b_pos + (nf - a_pos) * (nf - b_pos)) / (nf * nf);
    let kappa = if expected >= 1.0 {
        None
    } else {
        Some((observed - expected) / (1.0 - expected))
    };
    Ok(KappaResult {
        kappa,
        observed,
        expected,
        items: n,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "id")]
pub enum KappaRowKey {
    Category(String),
    AllErrors,
    AnyErrors,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "id")]
pub enum KappaColumn {
    System(String),
    Concat,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaRow {
    pub key: KappaRowKey,
    pub cells: Vec<KappaResult>,
}

/// Kappa per category row and per system column, plus the concatenation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaReport {
    pub columns: Vec<KappaColumn>,
    pub rows: Vec<KappaRow>,
}

impl KappaReport {
    pub fn cell(&self, row: &KappaRowKey, col: &KappaColumn) -> Option<&KappaResult> {
        let c = self.columns.iter().position(|x| x == col)?;
        self.rows.iter().find(|r| &r.key == row).map(|r| &r.cells[c])
    }
}

/// Builds the full agreement table.
///
/// Category rows include descendants. `AnyErrors` asks whether a sentence has
/// any annotation at all. `AllErrors` pools one item per (sentence, selectable
/// category), labelled by direct use of that exact category.
pub fn kappa_report(d: &Dataset) -> Result<KappaReport, IaaError> {
    two_annotators(d)?;
    let systems: Vec<&str> = d.systems().iter().map(String::as_str).collect();
    let mut columns: Vec<(KappaColumn, Vec<&str>)> = systems
        .iter()
        .map(|&s| (KappaColumn::System(s.to_owned()), vec![s]))
        .collect();
    columns.push((KappaColumn::Concat, systems.clone()));

    let cell = |filter: &CategoryFilter, cols: &[&str]| -> Result<KappaResult, IaaError> {
        cohens_kappa(&derive_sentence_labels(d, filter, cols)?)
    };
    let mut rows = Vec::new();
    for c in d.taxonomy().categories() {
        let filter = CategoryFilter::subtree(&c.id);
        let cells = columns
            .iter()
            .map(|(_, cols)| cell(&filter, cols))
            .collect::<Result<_, _>>()?;
        rows.push(KappaRow {
            key: KappaRowKey::Category(c.id.clone()),
            cells,
        });
    }

    let selectable: Vec<&str> = d
        .taxonomy()
        .categories()
        .iter()
        .filter(|c| c.selectable)
        .map(|c| c.id.as_str())
        .collect();
    let mut all_cells = Vec::new();
    for (_, cols) in &columns {
        let mut pooled = SentenceLabelMatrix {
            items: Vec::new(),
            labels_a: Vec::new(),
            labels_b: Vec::new(),
        };
        for id in &selectable {
            pooled.extend(derive_sentence_labels(d, &CategoryFilter::exact(*id), cols)?);
        }
        all_cells.push(cohens_kappa(&pooled)?);
    }
    rows.push(KappaRow {
        key: KappaRowKey::AllErrors,
        cells: all_cells,
    });
    let any_cells = columns
        .iter()
        .map(|(_, cols)| cell(&CategoryFilter::Any, cols))
        .collect::<Result<_, _>>()?;
    rows.push(KappaRow {
        key: KappaRowKey::AnyErrors,
        cells: any_cells,
    });

    Ok(KappaReport {
        columns: columns.into_iter().map(|(c, _)| c).collect(),
        rows,
    })
}
