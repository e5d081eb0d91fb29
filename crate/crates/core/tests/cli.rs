mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mqm_core::dataset_io::{export_dataset, load_dataset};
use serde_json::Value;

fn mqm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mqm"))
        .args(args)
        .env_remove("MQM_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn manifest_path(rel: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(rel).display().to_string()
}

fn dataset_dir(seed: u64) -> (tempfile::TempDir, PathBuf) {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("data");
    export_dataset(&common::random_dataset(seed, &common::Shape::default()), &dir).unwrap();
    (tmp, dir)
}

#[test]
fn significance_from_counts_file() {
    let counts = manifest_path("fixtures/category_counts.csv");
    let out = mqm(&["significance", "--counts", &counts]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.starts_with("## Error counts and pairwise significance"));
    assert!(
        text.contains("| 0.001161* (\u{2212}) |"),
        "omission regression mark:\n{text}"
    );

    let out = mqm(&["significance", "--counts", &counts, "--format", "csv"]);
    let mut rdr = csv::Reader::from_reader(out.stdout.as_slice());
    let headers = rdr.headers().unwrap().clone();
    let stars = headers.iter().position(|h| h == "factored->nmt_stars").unwrap();
    let direction = headers.iter().position(|h| h == "factored->nmt_direction").unwrap();
    let fluency = rdr.records().map(Result::unwrap).find(|r| &r[0] == "fluency").unwrap();
    assert_eq!(&fluency[stars], "**");
    assert_eq!(&fluency[direction], "improvement");
}

#[test]
fn disabling_the_expected_count_rule_marks_sparse_cells() {
    let counts = manifest_path("fixtures/category_counts.csv");
    let json = |extra: &[&str]| -> Value {
        let mut args = vec!["significance", "--counts", &counts, "--format", "json"];
        args.extend_from_slice(extra);
        let docs: Value = serde_json::from_slice(&mqm(&args).stdout).unwrap();
        docs[0].clone()
    };
    let person = |v: &Value| {
        v["rows"]
            .as_array()
            .unwrap()
            .iter()
            .find(|r| r["key"] == "fluency.grammar.word_form.agreement.person")
            .unwrap()["cells"]["factored->nmt"]
            .clone()
    };
    let guarded = person(&json(&[]));
    assert_eq!(guarded["stars"], "");
    assert_eq!(guarded["low_expected"], true);
    assert_eq!(person(&json(&["--min-expected", "0"]))["stars"], "*");
}

#[test]
fn scope_pipeline_from_counts() {
    let counts = manifest_path("fixtures/agreement_scope_counts.csv");
    let out = mqm(&["scope", "--counts", &counts, "--format", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let docs: Value = serde_json::from_slice(&out.stdout).unwrap();
    let sig = docs.as_array().unwrap().last().unwrap();
    let phrase = sig["rows"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["key"] == "total.phrase")
        .unwrap();
    assert_eq!(phrase["cells"]["pbmt->factored"]["stars"], "*");
    assert_eq!(phrase["cells"]["factored->nmt"]["stars"], "**");
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(mqm(&["bogus"]).status.code(), Some(2));
    assert_eq!(mqm(&[]).status.code(), Some(2));
    let counts = manifest_path("fixtures/category_counts.csv");
    assert_eq!(
        mqm(&["ratios", "--counts", &counts, "--format", "xml"]).status.code(),
        Some(2)
    );
    // Neither a dataset nor a counts file.
    assert_eq!(mqm(&["ratios"]).status.code(), Some(2));
}

#[test]
fn data_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.csv");
    let out = mqm(&["ratios", "--counts", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.csv"));

    let bad = tmp.path().join("bad.csv");
    std::fs::write(&bad, "category_id,system_id,ok,err\nfluency,pbmt,ten,1\n").unwrap();
    assert_eq!(
        mqm(&["ratios", "--counts", bad.to_str().unwrap()]).status.code(),
        Some(1)
    );

    let tax = tmp.path().join("bad.tax");
    std::fs::write(&tax, "Accuracy\n    Orphan\n").unwrap();
    assert_eq!(
        mqm(&["validate-taxonomy", tax.to_str().unwrap()]).status.code(),
        Some(1)
    );
}

#[test]
fn validate_taxonomy_against_core() {
    let out = mqm(&[
        "validate-taxonomy",
        &manifest_path("taxonomies/slavic.tax"),
        "--against",
        "core",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.starts_with("ok: slavic@1.0, 23 categories"));
    assert!(text.contains("removed fluency.typography"));
    assert!(text.contains("added fluency.grammar.word_form.agreement.person"));

    let out = mqm(&["validate-taxonomy", &manifest_path("taxonomies/core.tax")]);
    assert!(stdout(&out).starts_with("ok: mqm-core@"));
}

#[test]
fn iaa_layout_on_a_dataset() {
    let (_tmp, dir) = dataset_dir(3);
    let out = mqm(&["iaa", "--dataset", dir.to_str().unwrap(), "--format", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let docs: Value = serde_json::from_slice(&out.stdout).unwrap();
    let v = &docs[0];
    let cols: Vec<&str> = v["columns"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["key"].as_str().unwrap())
        .collect();
    assert_eq!(cols, ["pbmt", "factored", "nmt", "concat"]);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 25);
    assert_eq!(rows[23]["key"], "all_errors");
    assert_eq!(rows[24]["key"], "any_errors");

    let out = mqm(&[
        "iaa",
        "--dataset",
        dir.to_str().unwrap(),
        "--by",
        "concat",
        "--format",
        "csv",
    ]);
    let header = stdout(&out).lines().next().unwrap().to_owned();
    assert_eq!(header, "key,label,depth,concat");
}

#[test]
fn dataset_directory_from_environment() {
    let (_tmp, dir) = dataset_dir(4);
    let out = Command::new(env!("CARGO_BIN_EXE_mqm"))
        .args(["ratios", "--format", "csv"])
        .env("MQM_DATA_DIR", &dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).lines().any(|l| l.starts_with("TOTAL,")));
}

#[test]
fn import_then_report() {
    let (tmp, dir) = dataset_dir(5);
    let before = load_dataset(&dir).unwrap();
    let table = tmp.path().join("spans.csv");
    std::fs::write(
        &table,
        "annotator,system,segment,category,start,end,scope\n\
         ann1,nmt,1,Omission,phantom,,\n\
         ann2,pbmt,2,Agreement_Case,0,1,sentence:S+V\n",
    )
    .unwrap();
    let out_dir = tmp.path().join("merged");
    let out = mqm(&[
        "import",
        "--dataset",
        dir.to_str().unwrap(),
        "--from",
        table.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let after = load_dataset(&out_dir).unwrap();
    assert_eq!(after.annotations().len(), before.annotations().len() + 2);
    let added = after.annotations().last().unwrap();
    assert_eq!(added.category, "fluency.grammar.word_form.agreement.case");
    assert_eq!(added.scope.unwrap().to_string(), "sentence:S+V");

    let out = mqm(&["report", "--dataset", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    for title in [
        "## Inter-annotator agreement",
        "## Error counts and pairwise significance",
    ] {
        assert!(text.contains(title), "missing {title}");
    }

    std::fs::write(
        &table,
        "annotator,system,segment,category,start,end\nann1,nmt,1,Typography,0,1\n",
    )
    .unwrap();
    let out = mqm(&[
        "import",
        "--dataset",
        dir.to_str().unwrap(),
        "--from",
        table.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Typography"));
    assert_eq!(
        load_dataset(&dir).unwrap(),
        before,
        "failed import must not touch the dataset"
    );
}

#[test]
fn export_writes_a_loadable_copy() {
    let (tmp, dir) = dataset_dir(6);
    let out_dir = tmp.path().join("copy");
    let out = mqm(&[
        "export",
        "--dataset",
        dir.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(load_dataset(&out_dir).unwrap(), load_dataset(&dir).unwrap());
}
