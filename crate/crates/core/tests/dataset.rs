mod common;

use std::fs;

use mqm_core::dataset_io::{export_dataset, load_dataset, render_file_set, AnnotationStore};
use mqm_core::iaa::kappa_report;
use mqm_core::stats::{significance_matrix, CountTable, PairMode, SignificanceOptions, TOTAL_KEY};
use mqm_core::taxonomy::{parse_taxonomy, slavic_tagset};
use mqm_core::{AnnotationSpan, CategoryFilter, TokenSpan};
use proptest::prelude::*;

fn full_scale() -> mqm_core::Dataset {
    common::random_dataset(
        100,
        &common::Shape {
            segments: 100,
            max_tokens: 30,
            max_spans_per_item: 5,
        },
    )
}

#[test]
fn full_scale_corpus_round_trips_byte_for_byte() {
    let d = full_scale();
    assert_eq!(d.segments().len(), 100);
    assert_eq!(d.outputs().len(), 300);
    assert_eq!(d.outputs().len() * d.annotators().len(), 600);

    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    export_dataset(&d, &a).unwrap();
    let loaded = load_dataset(&a).unwrap();
    assert_eq!(loaded, d);
    export_dataset(&loaded, &b).unwrap();
    for (name, _) in render_file_set(&d) {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name} differs"
        );
    }

    // Every analysis runs on the loaded copy.
    let counts = loaded.count_table().unwrap();
    assert_eq!(counts.rows().len(), 24);
    significance_matrix(&counts, PairMode::All, &SignificanceOptions::default()).unwrap();
    let k = kappa_report(&loaded).unwrap();
    assert_eq!(k.rows.len(), 25);
}

#[test]
fn counts_survive_the_csv_path() {
    let counts = full_scale().count_table().unwrap();
    let back = CountTable::from_csv(&counts.to_csv()).unwrap();
    assert_eq!(back, counts);
}

#[test]
fn store_log_replays_to_the_same_counts() {
    let base = common::random_dataset(7, &common::Shape::default());
    let tmp = tempfile::tempdir().unwrap();
    export_dataset(&base, tmp.path()).unwrap();
    let mut store = AnnotationStore::open(tmp.path()).unwrap();
    let out = &base.outputs()[0];
    store
        .append_annotation(AnnotationSpan::new(
            "ann1",
            out.system.clone(),
            out.segment,
            common::OMISSION,
            TokenSpan::Phantom,
        ))
        .unwrap();
    store.replace_item("ann2", &out.system, out.segment, vec![]).unwrap();
    let live = store.snapshot().count_table().unwrap();
    drop(store);
    let reopened = AnnotationStore::open(tmp.path()).unwrap();
    assert_eq!(reopened.revision(), 2);
    assert_eq!(reopened.snapshot().count_table().unwrap(), live);
    assert_eq!(reopened.snapshot_at(0).unwrap(), base);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn error_tokens_never_exceed_effective_totals(seed in any::<u64>()) {
        let d = common::random_dataset(seed, &common::Shape { segments: 3, ..Default::default() });
        let counts = d.count_table().unwrap();
        let total = counts.row(TOTAL_KEY).unwrap();
        for row in counts.rows() {
            for (i, &(_, err)) in row.counts.iter().enumerate() {
                prop_assert!(err <= total.counts[i].1);
            }
        }
    }

    #[test]
    fn annotator_sums_are_additive(seed in any::<u64>()) {
        let d = common::random_dataset(seed, &common::Shape { segments: 4, ..Default::default() });
        for sys in d.systems() {
            let both = d.error_tokens(sys, &CategoryFilter::Any, &common::ANNOTATORS).unwrap();
            let split: u64 = common::ANNOTATORS
                .iter()
                .map(|a| d.error_tokens(sys, &CategoryFilter::Any, &[a]).unwrap())
                .sum();
            prop_assert_eq!(both, split);
        }
    }

    #[test]
    fn adding_a_phantom_moves_both_counts_by_one(seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let d = common::random_dataset(seed, &common::Shape { segments: 2, ..Default::default() });
        let out = &d.outputs()[pick.index(d.outputs().len())];
        let ann = ["ann1"];
        let before = (d.error_tokens(&out.system, &CategoryFilter::Any, &ann).unwrap(), d.effective_total(&out.system, &ann).unwrap());
        let extra = AnnotationSpan::new("ann1", out.system.clone(), out.segment, common::OMISSION, TokenSpan::Phantom);
        let e = common::with_annotations(&d, [extra]);
        let after = (e.error_tokens(&out.system, &CategoryFilter::Any, &ann).unwrap(), e.effective_total(&out.system, &ann).unwrap());
        prop_assert_eq!(after, (before.0 + 1, before.1 + 1));
    }

    #[test]
    fn taxonomy_text_round_trips(drop in 0usize..23) {
        // Removing any leaf keeps the rest valid and round-trippable.
        let tax = slavic_tagset();
        let text = tax.to_text();
        let victim = &tax.categories()[drop];
        let is_leaf = tax.children(&victim.id).unwrap().next().is_none();
        prop_assume!(is_leaf);
        let kept: Vec<&str> = text
            .lines()
            .filter(|l| l.trim() != victim.name)
            .collect();
        let parsed = parse_taxonomy(&(kept.join("\n") + "\n")).unwrap();
        prop_assert_eq!(parsed.len(), 22);
        prop_assert_eq!(parse_taxonomy(&parsed.to_text()).unwrap(), parsed);
    }
}
