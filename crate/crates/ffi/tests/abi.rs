use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;
use std::sync::Arc;

use mqm_core::corpus::{AnnotationSpan, Dataset, Segment, SystemOutput, TokenSpan};
use mqm_core::dataset_io::export_dataset;
use mqm_core::taxonomy::slavic_tagset;
use mqm_ffi::*;

fn take(p: *mut std::ffi::c_char) -> String {
    assert!(!p.is_null());
    let s = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned();
    unsafe { mqm_string_free(p) };
    s
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(mqm_last_error()) }.to_str().unwrap().to_owned()
}

#[test]
fn chi_squared_and_ratio() {
    let mut r = MqmChiSquare {
        chi2: 0.0,
        p: 0.0,
        min_expected: 0.0,
        stars: 9,
        lower: 9,
    };
    assert_eq!(
        unsafe { mqm_chi_squared_2x2(1835, 64, 1827, 62, &mut r) },
        MqmStatus::Ok
    );
    assert!((r.p - 0.8799).abs() < 1e-4);
    assert_eq!(r.stars, 0);

    assert_eq!(
        unsafe { mqm_chi_squared_2x2(1827, 62, 1814, 22, &mut r) },
        MqmStatus::Ok
    );
    assert_eq!((r.stars, r.lower), (2, 1));

    assert_eq!(
        unsafe { mqm_chi_squared_2x2(5, 0, 7, 0, &mut r) },
        MqmStatus::NotComputable
    );
    assert!(!last_error().is_empty());

    let mut ratio = 0.0;
    assert_eq!(unsafe { mqm_error_ratio(1010, 3836, &mut ratio) }, MqmStatus::Ok);
    assert!((ratio - 0.2633).abs() < 1e-4);
    assert_eq!(unsafe { mqm_error_ratio(1, 0, &mut ratio) }, MqmStatus::InvalidData);
    assert_eq!(
        unsafe { mqm_error_ratio(1, 2, ptr::null_mut()) },
        MqmStatus::NullArgument
    );
}

#[test]
fn kappa() {
    let a = [1u8, 1, 1, 0];
    let b = [1u8, 0, 1, 0];
    let mut k = MqmKappa {
        kappa: 0.0,
        observed: 0.0,
        expected: 0.0,
        items: 0,
        computable: false,
    };
    assert_eq!(
        unsafe { mqm_cohens_kappa(a.as_ptr(), b.as_ptr(), 4, &mut k) },
        MqmStatus::Ok
    );
    assert!(k.computable);
    assert_eq!(k.kappa, 0.5);

    let z = [0u8; 3];
    assert_eq!(
        unsafe { mqm_cohens_kappa(z.as_ptr(), z.as_ptr(), 3, &mut k) },
        MqmStatus::Ok
    );
    assert!(!k.computable && k.kappa.is_nan());
    assert_eq!(
        unsafe { mqm_cohens_kappa(ptr::null(), ptr::null(), 0, &mut k) },
        MqmStatus::NotComputable
    );
}

#[test]
fn taxonomy_handles() {
    let mut t = ptr::null_mut();
    let name = CString::new("slavic").unwrap();
    assert_eq!(unsafe { mqm_taxonomy_builtin(name.as_ptr(), &mut t) }, MqmStatus::Ok);
    assert_eq!(unsafe { mqm_taxonomy_len(t) }, 23);
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { mqm_taxonomy_to_json(t, &mut json) }, MqmStatus::Ok);
    let tree: serde_json::Value = serde_json::from_str(&take(json)).unwrap();
    assert_eq!(tree["name"], "slavic");

    let mut text = ptr::null_mut();
    assert_eq!(unsafe { mqm_taxonomy_to_text(t, &mut text) }, MqmStatus::Ok);
    let text = CString::new(take(text)).unwrap();
    let mut t2 = ptr::null_mut();
    assert_eq!(unsafe { mqm_taxonomy_parse(text.as_ptr(), &mut t2) }, MqmStatus::Ok);
    assert_eq!(unsafe { mqm_taxonomy_len(t2) }, 23);
    unsafe {
        mqm_taxonomy_free(t);
        mqm_taxonomy_free(t2);
        mqm_taxonomy_free(ptr::null_mut());
    }

    let bad = CString::new("Foo [foo] ^foo\n").unwrap();
    let mut t3 = ptr::null_mut();
    assert_eq!(
        unsafe { mqm_taxonomy_parse(bad.as_ptr(), &mut t3) },
        MqmStatus::ParseError
    );
    assert!(t3.is_null());
    let unknown = CString::new("klingon").unwrap();
    assert_eq!(
        unsafe { mqm_taxonomy_builtin(unknown.as_ptr(), &mut t3) },
        MqmStatus::NotFound
    );
    assert_eq!(
        unsafe { mqm_taxonomy_builtin(ptr::null(), &mut t3) },
        MqmStatus::NullArgument
    );
}

#[test]
fn significance_from_counts_text() {
    let text = CString::new(
        "category_id,system_id,ok,err\nTOTAL,pbmt,2826,1010\nTOTAL,factored,3007,809\nTOTAL,nmt,3199,469\n",
    )
    .unwrap();
    let mut out = ptr::null_mut();
    let st = unsafe {
        mqm_significance_from_counts(
            text.as_ptr(),
            ptr::null(),
            MqmPairMode::All,
            5.0,
            MqmFormat::Json,
            &mut out,
        )
    };
    assert_eq!(st, MqmStatus::Ok);
    let v: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
    let cells = &v[0]["rows"][0]["cells"];
    for pair in ["pbmt->factored", "factored->nmt", "pbmt->nmt"] {
        assert_eq!(cells[pair]["stars"], "**", "{pair}");
    }

    let scope = CString::new(
        "system_id,level,element,count\na,tokens,,1899\nb,tokens,,1889\na,phrase,PP+NP,24\nb,phrase,PP+NP,14\n",
    )
    .unwrap();
    let st = unsafe { mqm_scope_from_counts(scope.as_ptr(), 2, MqmPairMode::Adjacent, 5.0, MqmFormat::Csv, &mut out) };
    assert_eq!(st, MqmStatus::Ok);
    assert!(take(out).contains("phrase.PP+NP"));

    let garbage = CString::new("nope").unwrap();
    let st = unsafe {
        mqm_significance_from_counts(
            garbage.as_ptr(),
            ptr::null(),
            MqmPairMode::All,
            5.0,
            MqmFormat::Csv,
            &mut out,
        )
    };
    assert_eq!(st, MqmStatus::ParseError);
}

fn write_dataset(dir: &std::path::Path) {
    let segments = vec![Segment {
        id: 0,
        source: "The big house.".into(),
        reference: "Velika kuća.".into(),
    }];
    let outputs = vec![
        SystemOutput::new("s1", 0, "Velika kuća ."),
        SystemOutput::new("s2", 0, "Veliki kuća."),
    ];
    let annotations = vec![
        AnnotationSpan::new(
            "a1",
            "s2",
            0,
            "fluency.grammar.word_form.agreement.gender",
            TokenSpan::range(0, 2),
        ),
        AnnotationSpan::new(
            "a2",
            "s2",
            0,
            "fluency.grammar.word_form.agreement.gender",
            TokenSpan::range(0, 1),
        ),
        AnnotationSpan::new("a1", "s1", 0, "accuracy.omission", TokenSpan::Phantom),
    ];
    let d = Dataset::new(
        "tiny",
        Arc::new(slavic_tagset()),
        vec!["a1".into(), "a2".into()],
        vec!["s1".into(), "s2".into()],
        segments,
        outputs,
        annotations,
    )
    .unwrap();
    export_dataset(&d, dir).unwrap();
}

#[test]
fn dataset_handles() {
    let tmp = tempfile::tempdir().unwrap();
    write_dataset(tmp.path());
    let dir = CString::new(tmp.path().to_str().unwrap()).unwrap();
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { mqm_dataset_load(dir.as_ptr(), &mut d) }, MqmStatus::Ok);

    let s1 = CString::new("s1").unwrap();
    let s2 = CString::new("s2").unwrap();
    let a1 = CString::new("a1").unwrap();
    let mut n = 0u64;
    assert_eq!(
        unsafe { mqm_dataset_effective_token_count(d, s1.as_ptr(), a1.as_ptr(), &mut n) },
        MqmStatus::Ok
    );
    assert_eq!(n, 4);
    let agreement = CString::new("fluency.grammar.word_form.agreement").unwrap();
    assert_eq!(
        unsafe { mqm_dataset_error_tokens(d, s2.as_ptr(), agreement.as_ptr(), &mut n) },
        MqmStatus::Ok
    );
    assert_eq!(n, 3);
    assert_eq!(
        unsafe { mqm_dataset_error_tokens(d, s1.as_ptr(), ptr::null(), &mut n) },
        MqmStatus::Ok
    );
    assert_eq!(n, 1);
    let nope = CString::new("s9").unwrap();
    assert_eq!(
        unsafe { mqm_dataset_error_tokens(d, nope.as_ptr(), ptr::null(), &mut n) },
        MqmStatus::NotFound
    );

    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { mqm_dataset_report(d, MqmPairMode::Adjacent, 5.0, MqmFormat::Markdown, &mut out) },
        MqmStatus::Ok
    );
    let md = take(out);
    assert!(md.contains("Any errors"));
    unsafe { mqm_dataset_free(d) };

    let missing = CString::new(tmp.path().join("nope").to_str().unwrap()).unwrap();
    let mut d = ptr::null_mut();
    assert_eq!(
        unsafe { mqm_dataset_load(missing.as_ptr(), &mut d) },
        MqmStatus::IoError
    );
    assert!(last_error().contains("manifest"));
}

/// Compiles a small C program against the generated header and static
/// library. Skipped when no C compiler or static library is available.
#[test]
fn c_program_links_against_header() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header_dir = manifest.join("include");
    assert!(header_dir.join("mqm.h").exists(), "build script writes the header");

    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|p| p.parent()).unwrap();
    let lib = profile_dir.join("libmqm_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no static library or C compiler");
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include <string.h>
#include "mqm.h"

int main(void) {
    MqmChiSquare r;
    if (mqm_chi_squared_2x2(1811, 88, 1835, 54, &r) != MQM_STATUS_OK) return 1;
    if (r.stars != 1 || r.p < 0.003 || r.p > 0.005) return 2;

    MqmTaxonomy *t = NULL;
    if (mqm_taxonomy_builtin("slavic", &t) != MQM_STATUS_OK) return 3;
    if (mqm_taxonomy_len(t) != 23) return 4;
    char *json = NULL;
    if (mqm_taxonomy_to_json(t, &json) != MQM_STATUS_OK) return 5;
    if (strstr(json, "agreement") == NULL) return 6;
    mqm_string_free(json);
    mqm_taxonomy_free(t);

    if (mqm_taxonomy_builtin("nope", &t) != MQM_STATUS_NOT_FOUND) return 7;
    if (strlen(mqm_last_error()) == 0) return 8;
    printf("ok %s\n", mqm_version());
    return 0;
}
"#,
    )
    .unwrap();
    let bin = tmp.path().join("smoke");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&header_dir)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compile/link failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(
        out.status.success(),
        "smoke program exited with {:?}",
        out.status.code()
    );
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
