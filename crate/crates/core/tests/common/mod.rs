//! Random synthetic datasets shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use mqm_core::scope::{ScopeLabel, ScopeLevel};
use mqm_core::taxonomy::slavic_tagset;
use mqm_core::{AnnotationSpan, Dataset, Segment, SystemOutput, Taxonomy, TokenSpan};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const SYSTEMS: [&str; 3] = ["pbmt", "factored", "nmt"];
pub const ANNOTATORS: [&str; 2] = ["ann1", "ann2"];
pub const OMISSION: &str = "accuracy.omission";

const WORDS: &[&str] = &[
    "veliki",
    "broj",
    "ljudi",
    "radi",
    "u",
    "palijativnoj",
    "skrbi",
    "stalna",
    "jedinica",
    "koja",
    "se",
    "bori",
    "protiv",
    "korupcije",
    "i",
    "vlada",
    "je",
    "donijela",
    "novi",
    "zakon",
    "o",
    "radu",
];

pub struct Shape {
    pub segments: u32,
    pub max_tokens: usize,
    pub max_spans_per_item: usize,
}

impl Default for Shape {
    fn default() -> Self {
        Self {
            segments: 6,
            max_tokens: 20,
            max_spans_per_item: 4,
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn sentence(rng: &mut ChaCha8Rng, max_tokens: usize) -> String {
    let n = rng.gen_range(1..=max_tokens);
    let mut words: Vec<&str> = (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect();
    if rng.gen_bool(0.5) {
        words.push(".");
    }
    words.join(" ")
}

pub fn selectable(tax: &Taxonomy) -> Vec<String> {
    tax.categories()
        .iter()
        .filter(|c| c.selectable)
        .map(|c| c.id.clone())
        .collect()
}

/// Omissions are always phantom spans. Agreement spans carry a scope about
/// half of the time.
pub fn random_dataset(seed: u64, shape: &Shape) -> Dataset {
    let mut rng = rng(seed);
    let tax = Arc::new(slavic_tagset());
    let cats = selectable(&tax);
    let segments: Vec<Segment> = (1..=shape.segments)
        .map(|id| Segment {
            id,
            source: sentence(&mut rng, shape.max_tokens),
            reference: sentence(&mut rng, shape.max_tokens),
        })
        .collect();
    let mut outputs = Vec::new();
    for sys in SYSTEMS {
        for seg in &segments {
            outputs.push(SystemOutput::new(sys, seg.id, sentence(&mut rng, shape.max_tokens)));
        }
    }
    let mut spans = Vec::new();
    for out in &outputs {
        for ann in ANNOTATORS {
            for _ in 0..rng.gen_range(0..=shape.max_spans_per_item) {
                let cat = cats.choose(&mut rng).unwrap().clone();
                spans.push(random_span(&mut rng, &tax, ann, out, cat));
            }
        }
    }
    Dataset::new(
        format!("synthetic-{seed}"),
        tax,
        ANNOTATORS.iter().map(|s| s.to_string()).collect(),
        SYSTEMS.iter().map(|s| s.to_string()).collect(),
        segments,
        outputs,
        spans,
    )
    .expect("generator only builds valid datasets")
}

fn random_span(rng: &mut ChaCha8Rng, tax: &Taxonomy, ann: &str, out: &SystemOutput, cat: String) -> AnnotationSpan {
    let span = if cat == OMISSION {
        TokenSpan::Phantom
    } else {
        let len = out.tokens().len();
        let start = rng.gen_range(0..len);
        TokenSpan::range(start, rng.gen_range(start + 1..=len))
    };
    let mut a = AnnotationSpan::new(ann, out.system.clone(), out.segment, cat, span);
    if tax.has_ancestor_key(&a.category, "agreement") && rng.gen_bool(0.5) {
        let level = if rng.gen_bool(0.5) {
            ScopeLevel::Phrase
        } else {
            ScopeLevel::Sentence
        };
        let element = *level.elements().choose(rng).unwrap();
        a.scope = Some(ScopeLabel::new(level, element).unwrap());
    }
    a
}

/// Same dataset with `extra` appended to its annotations.
pub fn with_annotations(d: &Dataset, extra: impl IntoIterator<Item = AnnotationSpan>) -> Dataset {
    let mut spans = d.annotations().to_vec();
    spans.extend(extra);
    Dataset::new(
        d.name(),
        d.taxonomy_arc(),
        d.annotators().to_vec(),
        d.systems().to_vec(),
        d.segments().to_vec(),
        d.outputs().to_vec(),
        spans,
    )
    .unwrap()
}
