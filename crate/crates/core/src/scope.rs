//! Phrase- vs sentence-level classification of agreement errors.
//!
//! Agreement spans may carry a [`ScopeLabel`] saying whether the disagreeing
//! elements sit inside one phrase or across phrase boundaries, and which
//! element types were involved. Label counts are turned into token-level
//! contingency rows by assuming a fixed number of tokens per error, then
//! tested pairwise like any other category.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AnnotationSpan, Dataset};
use crate::stats::{ContingencyTable2x2, PairMode, PairTest, SignificanceOptions};
use crate::taxonomy::Taxonomy;

/// Local key of the category whose subtree may carry scope labels.
pub const AGREEMENT_KEY: &str = "agreement";

/// Default tokens charged per agreement error: the two disagreeing elements.
pub const DEFAULT_TOKENS_PER_ERROR: u64 = 2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScopeError {
    #[error("scope labels only apply to agreement errors, not `{0}`")]
    NotAgreement(String),
    #[error("element {element} does not belong to {level} agreement")]
    InconsistentLabel { level: ScopeLevel, element: ScopeElement },
    #[error("cannot parse scope label `{0}`")]
    BadLabel(String),
    #[error("tokens per error must be at least 1")]
    ZeroFactor,
    #[error("{system}: {err} error tokens exceed the total of {total}")]
    ExceedsTotal { system: String, err: u64, total: u64 },
    #[error("scope counts line {line}: {message}")]
    Counts { line: u64, message: String },
    #[error("error tokens {err} are not a multiple of {factor}")]
    NotMultiple { err: u64, factor: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScopeLevel {
    Phrase,
    Sentence,
}

impl ScopeLevel {
    pub const ALL: [ScopeLevel; 2] = [ScopeLevel::Phrase, ScopeLevel::Sentence];

    pub fn as_str(self) -> &'static str {
        match self {
            ScopeLevel::Phrase => "phrase",
            ScopeLevel::Sentence => "sentence",
        }
    }

    /// Closed element inventory of this level, in table order.
    pub fn elements(self) -> &'static [ScopeElement] {
        use ScopeElement::*;
        match self {
            ScopeLevel::Phrase => &[PpNp, AdjN, NN, NumNp],
            ScopeLevel::Sentence => &[SubjVerb, VerbObj, NpConjNp, NpCsub],
        }
    }
}

impl fmt::Display for ScopeLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScopeLevel {
    type Err = ScopeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "phrase" => Ok(ScopeLevel::Phrase),
            "sentence" => Ok(ScopeLevel::Sentence),
            _ => Err(ScopeError::BadLabel(s.to_owned())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ScopeElement {
    /// Prepositional phrase containing a noun phrase.
    PpNp,
    /// Adjective and noun.
    AdjN,
    /// Two nouns.
    NN,
    /// Numeral inside a noun phrase.
    NumNp,
    /// Subject and verb.
    SubjVerb,
    /// Verb and object.
    VerbObj,
    /// Noun phrases coordinated by a conjunction.
    NpConjNp,
    /// Noun phrase followed by a subordinating conjunction.
    NpCsub,
    /// Anything outside the closed inventory; valid at either level.
    Other,
}

impl ScopeElement {
    pub fn as_str(self) -> &'static str {
        use ScopeElement::*;
        match self {
            PpNp => "PP+NP",
            AdjN => "ADJ+N",
            NN => "N+N",
            NumNp => "NUM+NP",
            SubjVerb => "S+V",
            VerbObj => "V+O",
            NpConjNp => "NP+C+NP",
            NpCsub => "NP+CSUB",
            Other => "OTHER",
        }
    }

    pub fn level(self) -> Option<ScopeLevel> {
        ScopeLevel::ALL.into_iter().find(|l| l.elements().contains(&self))
    }
}

impl fmt::Display for ScopeElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for ScopeElement {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl FromStr for ScopeElement {
    type Err = ScopeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        use ScopeElement::*;
        let up = s.trim().to_ascii_uppercase();
        [PpNp, AdjN, NN, NumNp, SubjVerb, VerbObj, NpConjNp, NpCsub, Other]
            .into_iter()
            .find(|e| e.as_str() == up)
            .ok_or_else(|| ScopeError::BadLabel(s.to_owned()))
    }
}

/// `phrase:PP+NP`, `sentence:S+V`, ...
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ScopeLabel {
    level: ScopeLevel,
    element: ScopeElement,
}

impl ScopeLabel {
    pub fn new(level: ScopeLevel, element: ScopeElement) -> Result<Self, ScopeError> {
        match element.level() {
            Some(l) if l != level => Err(ScopeError::InconsistentLabel { level, element }),
            _ => Ok(Self { level, element }),
        }
    }

    pub fn level(&self) -> ScopeLevel {
        self.level
    }

    pub fn element(&self) -> ScopeElement {
        self.element
    }
}

impl fmt::Display for ScopeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.level, self.element)
    }
}

impl FromStr for ScopeLabel {
    type Err = ScopeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (level, element) = s.split_once(':').ok_or_else(|| ScopeError::BadLabel(s.to_owned()))?;
        ScopeLabel::new(level.trim().parse()?, element.parse()?)
    }
}

impl Serialize for ScopeLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ScopeLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

pub(crate) fn check_scope(tax: &Taxonomy, category: &str, _label: &ScopeLabel) -> Result<(), ScopeError> {
    if tax.has_ancestor_key(category, AGREEMENT_KEY) {
        Ok(())
    } else {
        Err(ScopeError::NotAgreement(category.to_owned()))
    }
}

/// Returns `span` carrying `label`. Re-attaching the same label is a no-op.
pub fn attach_scope(tax: &Taxonomy, span: &AnnotationSpan, label: ScopeLabel) -> Result<AnnotationSpan, ScopeError> {
    check_scope(tax, &span.category, &label)?;
    Ok(AnnotationSpan {
        scope: Some(label),
        ..span.clone()
    })
}

/// Scoped agreement-error counts per system, with single-pass token totals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScopeCountTable {
    systems: Vec<String>,
    totals: Vec<u64>,
    counts: BTreeMap<(ScopeLevel, ScopeElement), Vec<u64>>,
}

impl ScopeCountTable {
    pub fn new(systems: Vec<String>, totals: Vec<u64>) -> Self {
        assert_eq!(systems.len(), totals.len(), "one token total per system");
        Self {
            systems,
            totals,
            counts: BTreeMap::new(),
        }
    }

    pub fn systems(&self) -> &[String] {
        &self.systems
    }

    pub fn totals(&self) -> &[u64] {
        &self.totals
    }

    fn system_index(&self, system: &str) -> Option<usize> {
        self.systems.iter().position(|s| s == system)
    }

    pub fn add(&mut self, system: &str, label: ScopeLabel, n: u64) -> Option<()> {
        let s = self.system_index(system)?;
        let width = self.systems.len();
        self.counts
            .entry((label.level, label.element))
            .or_insert_with(|| vec![0; width])[s] += n;
        Some(())
    }

    pub fn count(&self, system: &str, level: ScopeLevel, element: ScopeElement) -> u64 {
        let Some(s) = self.system_index(system) else { return 0 };
        self.counts.get(&(level, element)).map_or(0, |v| v[s])
    }

    /// Sum over every element of `level`.
    pub fn level_total(&self, system: &str, level: ScopeLevel) -> u64 {
        let Some(s) = self.system_index(system) else { return 0 };
        self.counts
            .iter()
            .filter(|((l, _), _)| *l == level)
            .map(|(_, v)| v[s])
            .sum()
    }

    /// Elements of `level` in table order; `OTHER` only when it was used.
    pub fn elements(&self, level: ScopeLevel) -> Vec<ScopeElement> {
        let mut v = level.elements().to_vec();
        if self.counts.contains_key(&(level, ScopeElement::Other)) {
            v.push(ScopeElement::Other);
        }
        v
    }

    /// Reads `system_id,level,element,count` rows. Rows with level `tokens`
    /// (element left empty) give each system's token total.
    pub fn from_csv(text: &str) -> Result<Self, ScopeError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let bad = |line: u64, message: String| ScopeError::Counts { line, message };
        let headers = rdr.headers().map_err(|e| bad(1, e.to_string()))?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| bad(1, format!("missing column `{name}`")))
        };
        let (si, li, ei, ni) = (col("system_id")?, col("level")?, col("element")?, col("count")?);

        let mut systems: Vec<String> = Vec::new();
        let mut totals: Vec<Option<u64>> = Vec::new();
        let mut entries = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| bad(e.position().map_or(0, |p| p.line()), e.to_string()))?;
            let line = rec.position().map_or(0, |p| p.line());
            let f = |i: usize| rec.get(i).unwrap_or("");
            let n: u64 = f(ni)
                .parse()
                .map_err(|_| bad(line, format!("`{}` is not a count", f(ni))))?;
            let sys = f(si);
            let s = systems.iter().position(|x| x == sys).unwrap_or_else(|| {
                systems.push(sys.to_owned());
                totals.push(None);
                systems.len() - 1
            });
            if f(li).eq_ignore_ascii_case("tokens") {
                if totals[s].replace(n).is_some() {
                    return Err(bad(line, format!("duplicate token total for `{sys}`")));
                }
            } else {
                let label = ScopeLabel::new(
                    f(li).parse().map_err(|_| bad(line, format!("bad level `{}`", f(li))))?,
                    f(ei)
                        .parse()
                        .map_err(|_| bad(line, format!("bad element `{}`", f(ei))))?,
                )
                .map_err(|e| bad(line, e.to_string()))?;
                entries.push((s, label, n));
            }
        }
        let totals = totals
            .into_iter()
            .zip(&systems)
            .map(|(t, s)| t.ok_or_else(|| bad(0, format!("no token total for `{s}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        let mut table = ScopeCountTable::new(systems, totals);
        for (s, label, n) in entries {
            let sys = table.systems[s].clone();
            table.add(&sys, label, n);
        }
        Ok(table)
    }
}

/// Counts every scoped span (all annotators) per system and label; token
/// totals are the real output token counts.
pub fn scope_counts(d: &Dataset) -> ScopeCountTable {
    let totals = d.systems().iter().map(|s| d.real_token_count(s).unwrap_or(0)).collect();
    let mut table = ScopeCountTable::new(d.systems().to_vec(), totals);
    for a in d.annotations() {
        if let Some(label) = a.scope {
            table.add(&a.system, label, 1);
        }
    }
    table
}

/// One row of token-normalized scope data: either a level total
/// (`element == None`) or a single element.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScopeRow {
    pub level: ScopeLevel,
    pub element: Option<ScopeElement>,
    /// `(ok, err)` per system.
    pub counts: Vec<(u64, u64)>,
}

impl ScopeRow {
    pub fn key(&self) -> String {
        match self.element {
            None => format!("total.{}", self.level),
            Some(e) => format!("{}.{}", self.level, e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NormalizedScope {
    pub systems: Vec<String>,
    pub tokens_per_error: u64,
    pub rows: Vec<ScopeRow>,
}

impl NormalizedScope {
    pub fn row(&self, level: ScopeLevel, element: Option<ScopeElement>) -> Option<&ScopeRow> {
        self.rows.iter().find(|r| r.level == level && r.element == element)
    }

    /// Recovers raw error counts per row: `err / tokens_per_error`.
    pub fn denormalize(&self) -> Result<Vec<Vec<u64>>, ScopeError> {
        self.rows
            .iter()
            .map(|r| {
                r.counts
                    .iter()
                    .map(|&(_, err)| {
                        if err % self.tokens_per_error == 0 {
                            Ok(err / self.tokens_per_error)
                        } else {
                            Err(ScopeError::NotMultiple {
                                err,
                                factor: self.tokens_per_error,
                            })
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Turns label counts into `(ok, err)` rows: `err = count * tokens_per_error`,
/// `ok = total - err`. Rows come in table order: both level totals, then the
/// phrase elements, then the sentence elements.
pub fn scope_token_normalize(c: &ScopeCountTable, tokens_per_error: u64) -> Result<NormalizedScope, ScopeError> {
    if tokens_per_error == 0 {
        return Err(ScopeError::ZeroFactor);
    }
    let row = |level: ScopeLevel, element: Option<ScopeElement>| -> Result<ScopeRow, ScopeError> {
        let counts = c
            .systems
            .iter()
            .zip(&c.totals)
            .map(|(s, &total)| {
                let n = match element {
                    None => c.level_total(s, level),
                    Some(e) => c.count(s, level, e),
                };
                let err = n * tokens_per_error;
                if err > total {
                    return Err(ScopeError::ExceedsTotal {
                        system: s.clone(),
                        err,
                        total,
                    });
                }
                Ok((total - err, err))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ScopeRow { level, element, counts })
    };
    let mut rows = Vec::new();
    for level in ScopeLevel::ALL {
        rows.push(row(level, None)?);
    }
    for level in ScopeLevel::ALL {
        for e in c.elements(level) {
            rows.push(row(level, Some(e))?);
        }
    }
    Ok(NormalizedScope {
        systems: c.systems.clone(),
        tokens_per_error,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScopeSignificanceRow {
    pub key: String,
    pub level: ScopeLevel,
    pub element: Option<ScopeElement>,
    pub counts: Vec<(u64, u64)>,
    pub tests: Vec<PairTest>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScopeSignificance {
    pub systems: Vec<String>,
    pub pairs: Vec<(usize, usize)>,
    pub rows: Vec<ScopeSignificanceRow>,
}

impl ScopeSignificance {
    pub fn test(&self, level: ScopeLevel, element: Option<ScopeElement>, a: &str, b: &str) -> Option<&PairTest> {
        let ia = self.systems.iter().position(|s| s == a)?;
        let ib = self.systems.iter().position(|s| s == b)?;
        let k = self.pairs.iter().position(|&p| p == (ia, ib))?;
        self.rows
            .iter()
            .find(|r| r.level == level && r.element == element)
            .map(|r| &r.tests[k])
    }
}

/// Pairwise chi-squared over every normalized row.
pub fn scope_significance(n: &NormalizedScope, mode: PairMode, opts: &SignificanceOptions) -> ScopeSignificance {
    let pairs = mode.pairs(n.systems.len());
    let rows = n
        .rows
        .iter()
        .map(|r| ScopeSignificanceRow {
            key: r.key(),
            level: r.level,
            element: r.element,
            counts: r.counts.clone(),
            tests: pairs
                .iter()
                .map(|&(i, j)| {
                    PairTest::evaluate(
                        ContingencyTable2x2::new(n.systems[i].clone(), r.counts[i], n.systems[j].clone(), r.counts[j]),
                        opts,
                    )
                })
                .collect(),
        })
        .collect();
    ScopeSignificance {
        systems: n.systems.clone(),
        pairs,
        rows,
    }
}
