//! The evaluation corpus: segments, per-system tokenized outputs, and the
//! span-level annotations over them.
//!
//! Token counting follows two rules. A token is an error token for a
//! category (per annotator) when at least one matching span covers it, so
//! overlapping or duplicated range spans never count a token twice. Every
//! phantom span (an Omission marked on nothing) adds one synthetic token to
//! both the error count and the output's effective length.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scope::ScopeLabel;
use crate::stats::{CountTable, TOTAL_KEY};
use crate::taxonomy::Taxonomy;

/// Local key of the category (and its descendants) that may carry phantom spans.
pub const OMISSION_KEY: &str = "omission";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CorpusError {
    #[error("duplicate segment id {0}")]
    DuplicateSegment(u32),
    #[error("duplicate {kind} id `{id}` in registry")]
    DuplicateRegistryId { kind: &'static str, id: String },
    #[error("output ({system}, {segment}) is listed twice")]
    DuplicateOutput { system: String, segment: u32 },
    #[error("output ({system}, {segment}) references unknown segment {segment}")]
    OutputWithoutSegment { system: String, segment: u32 },
    #[error("unknown system `{0}`")]
    UnknownSystem(String),
    #[error("unknown annotator `{0}`")]
    UnknownAnnotator(String),
    #[error("annotation references missing output ({system}, {segment})")]
    UnknownOutput { system: String, segment: u32 },
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
    #[error("category `{0}` is not selectable")]
    NotSelectable(String),
    #[error("span [{start}, {end}) is outside an output of {len} tokens")]
    SpanOutOfRange { start: usize, end: usize, len: usize },
    #[error("phantom spans are only allowed for omissions, not `{0}`")]
    PhantomNotOmission(String),
    #[error(transparent)]
    Scope(#[from] crate::scope::ScopeError),
}

/// Splits on whitespace, then peels opening `"(` and closing `.,;:!?")`
/// characters off each word as tokens of their own.
pub fn tokenize(text: &str) -> Vec<String> {
    const LEADING: &[char] = &['"', '('];
    const TRAILING: &[char] = &['.', ',', ';', ':', '!', '?', '"', ')'];
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let mut w = word;
        while let Some(c) = w.chars().next().filter(|c| LEADING.contains(c)) {
            out.push(c.to_string());
            w = &w[c.len_utf8()..];
        }
        let mut tail = Vec::new();
        while let Some(c) = w.chars().next_back().filter(|c| TRAILING.contains(c)) {
            tail.push(c.to_string());
            w = &w[..w.len() - c.len_utf8()];
        }
        if !w.is_empty() {
            out.push(w.to_owned());
        }
        out.extend(tail.into_iter().rev());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub id: u32,
    pub source: String,
    pub reference: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemOutput {
    pub system: String,
    pub segment: u32,
    pub text: String,
    tokens: Vec<String>,
}

impl SystemOutput {
    pub fn new(system: impl Into<String>, segment: u32, text: impl Into<String>) -> Self {
        let text = text.into();
        Self {
            system: system.into(),
            segment,
            tokens: tokenize(&text),
            text,
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Tokens joined by single spaces.
    pub fn normalized_text(&self) -> String {
        self.tokens.join(" ")
    }
}

/// Token range `[start, end)` or a phantom token for an omission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenSpan {
    Range { start: usize, end: usize },
    Phantom,
}

impl TokenSpan {
    pub fn range(start: usize, end: usize) -> Self {
        TokenSpan::Range { start, end }
    }
}

impl Serialize for TokenSpan {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            TokenSpan::Range { start, end } => [*start, *end].serialize(s),
            TokenSpan::Phantom => s.serialize_str("phantom"),
        }
    }
}

impl<'de> Deserialize<'de> for TokenSpan {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Range([usize; 2]),
            Marker(String),
        }
        match Raw::deserialize(d)? {
            Raw::Range([start, end]) => Ok(TokenSpan::Range { start, end }),
            Raw::Marker(m) if m == "phantom" => Ok(TokenSpan::Phantom),
            Raw::Marker(m) => Err(serde::de::Error::custom(format!(
                "span must be [start, end] or \"phantom\", got \"{m}\""
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AnnotationSpan {
    pub annotator: String,
    pub system: String,
    pub segment: u32,
    pub category: String,
    pub span: TokenSpan,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scope: Option<ScopeLabel>,
}

impl AnnotationSpan {
    pub fn new(
        annotator: impl Into<String>,
        system: impl Into<String>,
        segment: u32,
        category: impl Into<String>,
        span: TokenSpan,
    ) -> Self {
        Self {
            annotator: annotator.into(),
            system: system.into(),
            segment,
            category: category.into(),
            span,
            scope: None,
        }
    }

    pub fn is_phantom(&self) -> bool {
        self.span == TokenSpan::Phantom
    }
}

/// Which annotations a count or label derivation looks at.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CategoryFilter {
    /// Any category at all.
    Any,
    Category {
        id: String,
        include_descendants: bool,
    },
}

impl CategoryFilter {
    pub fn subtree(id: impl Into<String>) -> Self {
        CategoryFilter::Category {
            id: id.into(),
            include_descendants: true,
        }
    }

    pub fn exact(id: impl Into<String>) -> Self {
        CategoryFilter::Category {
            id: id.into(),
            include_descendants: false,
        }
    }

    pub(crate) fn matches(&self, tax: &Taxonomy, category: &str) -> bool {
        match self {
            CategoryFilter::Any => true,
            CategoryFilter::Category {
                id,
                include_descendants: true,
            } => tax.is_within(category, id),
            CategoryFilter::Category { id, .. } => category == id,
        }
    }
}

/// A validated annotated corpus.
#[derive(Debug, Clone)]
pub struct Dataset {
    name: String,
    taxonomy: Arc<Taxonomy>,
    annotators: Vec<String>,
    systems: Vec<String>,
    segments: Vec<Segment>,
    outputs: Vec<SystemOutput>,
    annotations: Vec<AnnotationSpan>,
    segment_index: HashMap<u32, usize>,
    output_index: HashMap<(String, u32), usize>,
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && *self.taxonomy == *other.taxonomy
            && self.annotators == other.annotators
            && self.systems == other.systems
            && self.segments == other.segments
            && self.outputs == other.outputs
            && self.annotations == other.annotations
    }
}

impl Dataset {
    /// Validates and assembles a dataset. Annotations are checked in order and
    /// the first invalid one is reported.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        taxonomy: Arc<Taxonomy>,
        annotators: Vec<String>,
        systems: Vec<String>,
        segments: Vec<Segment>,
        outputs: Vec<SystemOutput>,
        annotations: Vec<AnnotationSpan>,
    ) -> Result<Self, CorpusError> {
        for (kind, ids) in [("annotator", &annotators), ("system", &systems)] {
            let mut seen = HashSet::new();
            for id in ids {
                if !seen.insert(id) {
                    return Err(CorpusError::DuplicateRegistryId { kind, id: id.clone() });
                }
            }
        }
        let mut segment_index = HashMap::new();
        for (i, s) in segments.iter().enumerate() {
            if segment_index.insert(s.id, i).is_some() {
                return Err(CorpusError::DuplicateSegment(s.id));
            }
        }
        let mut output_index = HashMap::new();
        for (i, o) in outputs.iter().enumerate() {
            if !systems.contains(&o.system) {
                return Err(CorpusError::UnknownSystem(o.system.clone()));
            }
            if !segment_index.contains_key(&o.segment) {
                return Err(CorpusError::OutputWithoutSegment {
                    system: o.system.clone(),
                    segment: o.segment,
                });
            }
            if output_index.insert((o.system.clone(), o.segment), i).is_some() {
                return Err(CorpusError::DuplicateOutput {
                    system: o.system.clone(),
                    segment: o.segment,
                });
            }
        }
        let mut d = Self {
            name: name.into(),
            taxonomy,
            annotators,
            systems,
            segments,
            outputs,
            annotations: Vec::with_capacity(annotations.len()),
            segment_index,
            output_index,
        };
        for a in annotations {
            d.push_annotation(a)?;
        }
        Ok(d)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.taxonomy
    }

    pub fn taxonomy_arc(&self) -> Arc<Taxonomy> {
        Arc::clone(&self.taxonomy)
    }

    pub fn annotators(&self) -> &[String] {
        &self.annotators
    }

    pub fn systems(&self) -> &[String] {
        &self.systems
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment(&self, id: u32) -> Option<&Segment> {
        self.segment_index.get(&id).map(|&i| &self.segments[i])
    }

    pub fn outputs(&self) -> &[SystemOutput] {
        &self.outputs
    }

    pub fn output(&self, system: &str, segment: u32) -> Option<&SystemOutput> {
        self.output_index
            .get(&(system.to_owned(), segment))
            .map(|&i| &self.outputs[i])
    }

    pub fn annotations(&self) -> &[AnnotationSpan] {
        &self.annotations
    }

    /// Checks a span against every dataset invariant without storing it.
    pub fn validate_annotation(&self, a: &AnnotationSpan) -> Result<(), CorpusError> {
        if !self.annotators.contains(&a.annotator) {
            return Err(CorpusError::UnknownAnnotator(a.annotator.clone()));
        }
        if !self.systems.contains(&a.system) {
            return Err(CorpusError::UnknownSystem(a.system.clone()));
        }
        let out = self
            .output(&a.system, a.segment)
            .ok_or_else(|| CorpusError::UnknownOutput {
                system: a.system.clone(),
                segment: a.segment,
            })?;
        let cat = self
            .taxonomy
            .get(&a.category)
            .ok_or_else(|| CorpusError::UnknownCategory(a.category.clone()))?;
        if !cat.selectable {
            return Err(CorpusError::NotSelectable(a.category.clone()));
        }
        match a.span {
            TokenSpan::Range { start, end } => {
                if start >= end || end > out.tokens.len() {
                    return Err(CorpusError::SpanOutOfRange {
                        start,
                        end,
                        len: out.tokens.len(),
                    });
                }
            }
            TokenSpan::Phantom => {
                if !self.taxonomy.has_ancestor_key(&a.category, OMISSION_KEY) {
                    return Err(CorpusError::PhantomNotOmission(a.category.clone()));
                }
            }
        }
        if let Some(label) = &a.scope {
            crate::scope::check_scope(&self.taxonomy, &a.category, label)?;
        }
        Ok(())
    }

    pub fn push_annotation(&mut self, a: AnnotationSpan) -> Result<(), CorpusError> {
        self.validate_annotation(&a)?;
        self.annotations.push(a);
        Ok(())
    }

    /// Drops every annotation by `annotator` on one output; returns how many.
    pub fn clear_item(&mut self, annotator: &str, system: &str, segment: u32) -> usize {
        let before = self.annotations.len();
        self.annotations
            .retain(|a| !(a.annotator == annotator && a.system == system && a.segment == segment));
        before - self.annotations.len()
    }

    fn require_system(&self, system: &str) -> Result<(), CorpusError> {
        if self.systems.iter().any(|s| s == system) {
            Ok(())
        } else {
            Err(CorpusError::UnknownSystem(system.to_owned()))
        }
    }

    fn require_annotator(&self, annotator: &str) -> Result<(), CorpusError> {
        if self.annotators.iter().any(|s| s == annotator) {
            Ok(())
        } else {
            Err(CorpusError::UnknownAnnotator(annotator.to_owned()))
        }
    }

    fn require_filter(&self, filter: &CategoryFilter) -> Result<(), CorpusError> {
        match filter {
            CategoryFilter::Category { id, .. } if !self.taxonomy.contains(id) => {
                Err(CorpusError::UnknownCategory(id.clone()))
            }
            _ => Ok(()),
        }
    }

    /// Real tokens of all `system` outputs.
    pub fn real_token_count(&self, system: &str) -> Result<u64, CorpusError> {
        self.require_system(system)?;
        Ok(self
            .outputs
            .iter()
            .filter(|o| o.system == system)
            .map(|o| o.tokens.len() as u64)
            .sum())
    }

    /// Phantom spans placed by `annotator` on `system` outputs.
    pub fn phantom_count(&self, system: &str, annotator: &str) -> u64 {
        self.annotations
            .iter()
            .filter(|a| a.is_phantom() && a.system == system && a.annotator == annotator)
            .count() as u64
    }

    /// Output tokens of `system` plus one per phantom span by `annotator`.
    pub fn effective_token_count(&self, system: &str, annotator: &str) -> Result<u64, CorpusError> {
        self.require_annotator(annotator)?;
        Ok(self.real_token_count(system)? + self.phantom_count(system, annotator))
    }

    /// Counts `(annotator, token)` pairs covered by at least one matching
    /// span, phantoms included, summed over `annotators`.
    pub fn error_tokens(&self, system: &str, filter: &CategoryFilter, annotators: &[&str]) -> Result<u64, CorpusError> {
        self.require_system(system)?;
        self.require_filter(filter)?;
        for a in annotators {
            self.require_annotator(a)?;
        }
        let wanted: HashSet<&str> = annotators.iter().copied().collect();
        let mut covered: HashMap<(&str, u32), Vec<bool>> = HashMap::new();
        let mut phantoms = 0u64;
        for a in &self.annotations {
            if a.system != system
                || !wanted.contains(a.annotator.as_str())
                || !filter.matches(&self.taxonomy, &a.category)
            {
                continue;
            }
            match a.span {
                TokenSpan::Phantom => phantoms += 1,
                TokenSpan::Range { start, end } => {
                    let len = self.output(system, a.segment).map_or(0, |o| o.tokens.len());
                    let mask = covered
                        .entry((a.annotator.as_str(), a.segment))
                        .or_insert_with(|| vec![false; len]);
                    mask[start..end].iter_mut().for_each(|b| *b = true);
                }
            }
        }
        let ranges: u64 = covered.values().map(|m| m.iter().filter(|&&b| b).count() as u64).sum();
        Ok(ranges + phantoms)
    }

    /// Effective tokens summed over `annotators`: the denominator that pairs
    /// with [`Dataset::error_tokens`] over the same annotators.
    pub fn effective_total(&self, system: &str, annotators: &[&str]) -> Result<u64, CorpusError> {
        annotators.iter().map(|a| self.effective_token_count(system, a)).sum()
    }

    /// OK / error counts for every taxonomy category (descendants included)
    /// plus the `TOTAL` any-error row, with all annotators concatenated.
    pub fn count_table(&self) -> Result<CountTable, CorpusError> {
        let annotators: Vec<&str> = self.annotators.iter().map(String::as_str).collect();
        self.count_table_for(&annotators)
    }

    pub fn count_table_for(&self, annotators: &[&str]) -> Result<CountTable, CorpusError> {
        let totals: Vec<u64> = self
            .systems
            .iter()
            .map(|s| self.effective_total(s, annotators))
            .collect::<Result<_, _>>()?;
        let mut table = CountTable::new(self.systems.clone());
        let filters = self
            .taxonomy
            .categories()
            .iter()
            .map(|c| (c.id.clone(), CategoryFilter::subtree(&c.id)))
            .chain(std::iter::once((TOTAL_KEY.to_owned(), CategoryFilter::Any)));
        for (key, filter) in filters {
            let counts = self
                .systems
                .iter()
                .zip(&totals)
                .map(|(s, &total)| {
                    let err = self.error_tokens(s, &filter, annotators)?;
                    Ok((total - err, err))
                })
                .collect::<Result<Vec<_>, CorpusError>>()?;
            table.push_row(&key, counts).expect("one count per registered system");
        }
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::slavic_tagset;

    const CASE: &str = "fluency.grammar.word_form.agreement.case";

    fn tiny() -> Dataset {
        Dataset::new(
            "tiny",
            Arc::new(slavic_tagset()),
            vec!["a1".into(), "a2".into()],
            vec!["pbmt".into()],
            vec![Segment {
                id: 0,
                source: "src".into(),
                reference: "ref".into(),
            }],
            vec![SystemOutput::new(
                "pbmt",
                0,
                "jedan dva tri četiri pet šest sedam osam devet deset",
            )],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn tokenizer_examples() {
        assert_eq!(tokenize("Ma\u{010d}ke hodaju."), ["Mačke", "hodaju", "."]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("Bila je prva \u{017e}ena u svemiru.").len(), 7);
        assert_eq!(
            tokenize("(rekao je: \"da!\")"),
            ["(", "rekao", "je", ":", "\"", "da", "!", "\"", ")"]
        );
        assert_eq!(tokenize("Hali-Gali 2011. godine"), ["Hali-Gali", "2011", ".", "godine"]);
    }

    #[test]
    fn tokens_join_to_normalized_text() {
        let o = SystemOutput::new("s", 0, "  Na primjer,  stranice   pružaju... ");
        assert_eq!(o.normalized_text(), "Na primjer , stranice pružaju . . .");
        assert_eq!(tokenize(&o.normalized_text()), o.tokens());
    }

    #[test]
    fn phantom_adds_one_effective_token() {
        let mut d = tiny();
        assert_eq!(d.effective_token_count("pbmt", "a1").unwrap(), 10);
        d.push_annotation(AnnotationSpan::new(
            "a1",
            "pbmt",
            0,
            "accuracy.omission",
            TokenSpan::Phantom,
        ))
        .unwrap();
        assert_eq!(d.effective_token_count("pbmt", "a1").unwrap(), 11);
        assert_eq!(d.effective_token_count("pbmt", "a2").unwrap(), 10);
    }

    #[test]
    fn overlapping_spans_union() {
        let mut d = tiny();
        d.push_annotation(AnnotationSpan::new("a1", "pbmt", 0, CASE, TokenSpan::range(2, 5)))
            .unwrap();
        d.push_annotation(AnnotationSpan::new("a1", "pbmt", 0, CASE, TokenSpan::range(4, 6)))
            .unwrap();
        let n = d.error_tokens("pbmt", &CategoryFilter::subtree(CASE), &["a1"]).unwrap();
        assert_eq!(n, 4);
        assert_eq!(d.error_tokens("pbmt", &CategoryFilter::Any, &["a2"]).unwrap(), 0);
    }

    #[test]
    fn descendants_roll_up_only_when_asked() {
        let mut d = tiny();
        d.push_annotation(AnnotationSpan::new("a1", "pbmt", 0, CASE, TokenSpan::range(0, 2)))
            .unwrap();
        let agr = "fluency.grammar.word_form.agreement";
        assert_eq!(
            d.error_tokens("pbmt", &CategoryFilter::subtree(agr), &["a1"]).unwrap(),
            2
        );
        assert_eq!(d.error_tokens("pbmt", &CategoryFilter::exact(agr), &["a1"]).unwrap(), 0);
    }

    #[test]
    fn annotation_validation() {
        let mut d = tiny();
        let bad_range = AnnotationSpan::new("a1", "pbmt", 0, CASE, TokenSpan::range(3, 11));
        assert!(matches!(
            d.push_annotation(bad_range),
            Err(CorpusError::SpanOutOfRange { .. })
        ));
        let empty = AnnotationSpan::new("a1", "pbmt", 0, CASE, TokenSpan::range(3, 3));
        assert!(matches!(
            d.push_annotation(empty),
            Err(CorpusError::SpanOutOfRange { .. })
        ));
        let phantom = AnnotationSpan::new("a1", "pbmt", 0, "accuracy.mistranslation", TokenSpan::Phantom);
        assert!(matches!(
            d.push_annotation(phantom),
            Err(CorpusError::PhantomNotOmission(_))
        ));
        let typo = AnnotationSpan::new("a1", "pbmt", 0, "fluency.typography", TokenSpan::range(0, 1));
        assert!(matches!(d.push_annotation(typo), Err(CorpusError::UnknownCategory(_))));
        let who = AnnotationSpan::new("a9", "pbmt", 0, CASE, TokenSpan::range(0, 1));
        assert!(matches!(d.push_annotation(who), Err(CorpusError::UnknownAnnotator(_))));
        let sys = AnnotationSpan::new("a1", "smt4", 0, CASE, TokenSpan::range(0, 1));
        assert!(matches!(d.push_annotation(sys), Err(CorpusError::UnknownSystem(_))));
        let seg = AnnotationSpan::new("a1", "pbmt", 7, CASE, TokenSpan::range(0, 1));
        assert!(matches!(d.push_annotation(seg), Err(CorpusError::UnknownOutput { .. })));
        assert!(d.annotations().is_empty());
    }

    #[test]
    fn unknown_ids_in_counting() {
        let d = tiny();
        assert!(d.effective_token_count("nope", "a1").is_err());
        assert!(d.effective_token_count("pbmt", "nope").is_err());
        assert!(d.error_tokens("pbmt", &CategoryFilter::subtree("x"), &["a1"]).is_err());
    }

    #[test]
    fn clear_item_removes_only_that_item() {
        let mut d = tiny();
        d.push_annotation(AnnotationSpan::new("a1", "pbmt", 0, CASE, TokenSpan::range(0, 2)))
            .unwrap();
        d.push_annotation(AnnotationSpan::new("a2", "pbmt", 0, CASE, TokenSpan::range(0, 2)))
            .unwrap();
        assert_eq!(d.clear_item("a1", "pbmt", 0), 1);
        assert_eq!(d.annotations().len(), 1);
    }

    #[test]
    fn span_json_shape() {
        let a = AnnotationSpan::new("a1", "pbmt", 3, "accuracy.omission", TokenSpan::Phantom);
        let j = serde_json::to_string(&a).unwrap();
        assert_eq!(
            j,
            r#"{"annotator":"a1","system":"pbmt","segment":3,"category":"accuracy.omission","span":"phantom"}"#
        );
        let b: AnnotationSpan =
            serde_json::from_str(r#"{"annotator":"a","system":"s","segment":0,"category":"c","span":[1,4]}"#).unwrap();
        assert_eq!(b.span, TokenSpan::range(1, 4));
        assert!(serde_json::from_str::<TokenSpan>(r#""ghost""#).is_err());
    }
}
