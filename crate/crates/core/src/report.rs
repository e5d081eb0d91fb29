//! Report tables and their markdown, CSV, and JSON renderings.
//!
//! Human formats round for display (ratios 4 decimals, kappa 2, p-values 4
//! significant digits floored at `<0.0001`). CSV and JSON carry the full
//! `f64` values, written in shortest round-trip form so both agree exactly.

use std::fmt;
use std::str::FromStr;

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::iaa::{KappaColumn, KappaReport, KappaRowKey};
use crate::scope::{ScopeCountTable, ScopeLevel, ScopeSignificance};
use crate::stats::{
    CountTable, Direction, PairTest, SignificanceMatrix, Stars, HIGHLY_SIGNIFICANT_P, SIGNIFICANT_P, TOTAL_KEY,
};
use crate::taxonomy::Taxonomy;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown report format `{0}` (expected markdown, csv, or json)")]
pub struct UnknownFormat(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Markdown,
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = UnknownFormat;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(UnknownFormat(s.to_owned())),
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Markdown => "markdown",
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Empty,
    Text(String),
    Count(u64),
    Ratio(f64),
    /// `None` renders as not computable.
    Kappa(Option<f64>),
    /// A pairwise test. `p` is `None` when the table had a zero marginal.
    Test {
        p: Option<f64>,
        stars: Stars,
        direction: Direction,
        low_expected: bool,
    },
}

impl Cell {
    fn from_test(t: &PairTest) -> Self {
        Cell::Test {
            p: t.p(),
            stars: t.stars,
            direction: t.direction,
            low_expected: t.low_expected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    /// Machine key, used in CSV headers and JSON objects.
    pub key: String,
    pub label: String,
}

impl Column {
    fn new(key: impl Into<String>, label: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            label: label.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub key: String,
    pub label: String,
    pub depth: usize,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub title: String,
    /// Header of the row-label column.
    pub row_header: String,
    pub columns: Vec<Column>,
    pub rows: Vec<ReportRow>,
}

impl ReportTable {
    pub fn new(title: impl Into<String>, row_header: impl Into<String>, columns: Vec<Column>) -> Self {
        Self {
            title: title.into(),
            row_header: row_header.into(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, key: impl Into<String>, label: impl Into<String>, depth: usize, cells: Vec<Cell>) {
        assert_eq!(cells.len(), self.columns.len(), "one cell per column");
        self.rows.push(ReportRow {
            key: key.into(),
            label: label.into(),
            depth,
            cells,
        });
    }

    pub fn row(&self, key: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.key == key)
    }

    pub fn cell(&self, row: &str, column: &str) -> Option<&Cell> {
        let c = self.columns.iter().position(|x| x.key == column)?;
        self.row(row).map(|r| &r.cells[c])
    }
}

pub fn format_ratio(r: f64) -> String {
    format!("{r:.4}")
}

pub fn format_kappa(k: Option<f64>) -> String {
    match k {
        // `+ 0.0` turns a rounded negative zero into a plain zero
        Some(k) => format!("{:.2}", (k * 100.0).round() / 100.0 + 0.0),
        None => "\u{2014}".to_owned(),
    }
}

/// Four significant digits, floored at `<0.0001`.
pub fn format_p(p: f64) -> String {
    if p < HIGHLY_SIGNIFICANT_P {
        return "<0.0001".to_owned();
    }
    let decimals = (3 - p.log10().floor() as i32).max(0) as usize;
    format!("{p:.decimals$}")
}

fn human(cell: &Cell) -> String {
    match cell {
        Cell::Empty => String::new(),
        Cell::Text(s) => s.clone(),
        Cell::Count(n) => n.to_string(),
        Cell::Ratio(r) => format_ratio(*r),
        Cell::Kappa(k) => format_kappa(*k),
        Cell::Test {
            p,
            stars,
            direction,
            low_expected,
        } => {
            let Some(p) = p else {
                return "\u{2014}".to_owned();
            };
            let mut s = format_p(*p);
            if *stars != Stars::None {
                s.push_str(stars.as_str());
                if *direction != Direction::Unchanged {
                    s.push_str(&format!(" ({})", direction.symbol()));
                }
            }
            if *low_expected && *p < SIGNIFICANT_P {
                s.push_str(" (unmarked: low expected count)");
            }
            s
        }
    }
}

fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

fn machine(cell: &Cell) -> Value {
    match cell {
        Cell::Empty => Value::Null,
        Cell::Text(s) => Value::String(s.clone()),
        Cell::Count(n) => json!(n),
        Cell::Ratio(r) => num(*r),
        Cell::Kappa(k) => k.map_or(Value::Null, num),
        Cell::Test {
            p,
            stars,
            direction,
            low_expected,
        } => json!({
            "p": p.map_or(Value::Null, num),
            "stars": stars,
            "direction": direction,
            "low_expected": low_expected,
        }),
    }
}

fn csv_scalar(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn is_test_column(t: &ReportTable, c: usize) -> bool {
    t.rows.iter().any(|r| matches!(r.cells[c], Cell::Test { .. }))
}

fn render_markdown(t: &ReportTable) -> String {
    let escape = |s: &str| s.replace('|', "\\|");
    let mut out = format!("## {}\n\n", t.title);
    out.push_str(&format!("| {} |", escape(&t.row_header)));
    for c in &t.columns {
        out.push_str(&format!(" {} |", escape(&c.label)));
    }
    out.push_str("\n|---|");
    for _ in &t.columns {
        out.push_str("---:|");
    }
    out.push('\n');
    for r in &t.rows {
        // Non-breaking spaces survive markdown whitespace collapsing.
        let indent = "\u{a0}\u{a0}".repeat(r.depth);
        out.push_str(&format!("| {indent}{} |", escape(&r.label)));
        for cell in &r.cells {
            out.push_str(&format!(" {} |", escape(&human(cell))));
        }
        out.push('\n');
    }
    out
}

fn render_csv(t: &ReportTable) -> String {
    let tests: Vec<bool> = (0..t.columns.len()).map(|c| is_test_column(t, c)).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["key".to_owned(), "label".to_owned(), "depth".to_owned()];
    for (c, col) in t.columns.iter().enumerate() {
        if tests[c] {
            for suffix in ["p", "stars", "direction", "low_expected"] {
                header.push(format!("{}_{suffix}", col.key));
            }
        } else {
            header.push(col.key.clone());
        }
    }
    w.write_record(&header).expect("in-memory write");
    for r in &t.rows {
        let mut rec = vec![r.key.clone(), r.label.clone(), r.depth.to_string()];
        for (c, cell) in r.cells.iter().enumerate() {
            let v = machine(cell);
            if tests[c] {
                for k in ["p", "stars", "direction", "low_expected"] {
                    rec.push(v.get(k).map(csv_scalar).unwrap_or_default());
                }
            } else {
                rec.push(csv_scalar(&v));
            }
        }
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

fn to_json(t: &ReportTable) -> Value {
    let columns: Vec<Value> = t
        .columns
        .iter()
        .map(|c| json!({"key": c.key, "label": c.label}))
        .collect();
    let rows: Vec<Value> = t
        .rows
        .iter()
        .map(|r| {
            let cells: Map<String, Value> = t
                .columns
                .iter()
                .zip(&r.cells)
                .map(|(c, cell)| (c.key.clone(), machine(cell)))
                .collect();
            json!({"key": r.key, "label": r.label, "depth": r.depth, "cells": cells})
        })
        .collect();
    json!({"title": t.title, "row_header": t.row_header, "columns": columns, "rows": rows})
}

pub fn render(t: &ReportTable, format: ReportFormat) -> String {
    match format {
        ReportFormat::Markdown => render_markdown(t),
        ReportFormat::Csv => render_csv(t),
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(&to_json(t)).expect("report serializes");
            s.push('\n');
            s
        }
    }
}

/// Renders several tables as one document: markdown sections, CSV blocks
/// separated by blank lines, or a JSON array.
pub fn render_all(tables: &[ReportTable], format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let all: Vec<Value> = tables.iter().map(to_json).collect();
            let mut s = serde_json::to_string_pretty(&all).expect("report serializes");
            s.push('\n');
            s
        }
        _ => tables.iter().map(|t| render(t, format)).collect::<Vec<_>>().join("\n"),
    }
}

/// Display label and indentation depth for a category id. Ids unknown to
/// the taxonomy fall back to their dotted form.
fn category_label(tax: Option<&Taxonomy>, id: &str) -> (String, usize) {
    if id == TOTAL_KEY {
        return ("Total".to_owned(), 0);
    }
    match tax.and_then(|t| t.get(id).map(|c| (t, c))) {
        Some((t, c)) => (c.name.clone(), t.depth(id).unwrap_or(0)),
        None => (id.to_owned(), id.matches('.').count()),
    }
}

fn pair_label(systems: &[String], (a, b): (usize, usize)) -> (String, String) {
    (
        format!("{}->{}", systems[a], systems[b]),
        format!("{} \u{2192} {}", systems[a], systems[b]),
    )
}

fn count_and_test_columns(systems: &[String], pairs: &[(usize, usize)]) -> Vec<Column> {
    let mut cols = Vec::new();
    for s in systems {
        cols.push(Column::new(format!("{s}.ok"), format!("{s} OK")));
        cols.push(Column::new(format!("{s}.err"), format!("{s} Error")));
    }
    for &p in pairs {
        let (key, label) = pair_label(systems, p);
        cols.push(Column::new(key, label));
    }
    cols
}

fn count_and_test_cells(counts: &[(u64, u64)], tests: &[PairTest]) -> Vec<Cell> {
    counts
        .iter()
        .flat_map(|&(ok, err)| [Cell::Count(ok), Cell::Count(err)])
        .chain(tests.iter().map(Cell::from_test))
        .collect()
}

/// OK / error counts per system with one test column per compared pair, rows
/// in count-table order and indented by taxonomy depth.
pub fn significance_report(m: &SignificanceMatrix, tax: Option<&Taxonomy>) -> ReportTable {
    let mut t = ReportTable::new(
        "Error counts and pairwise significance",
        "Category",
        count_and_test_columns(&m.systems, &m.pairs),
    );
    for row in &m.rows {
        let (label, depth) = category_label(tax, &row.category);
        t.push(
            &row.category,
            label,
            depth,
            count_and_test_cells(&row.counts, &row.tests),
        );
    }
    t
}

/// Error ratio per category and system.
pub fn ratio_report(counts: &CountTable, tax: Option<&Taxonomy>) -> ReportTable {
    let columns = counts
        .systems()
        .iter()
        .map(|s| Column::new(s.clone(), s.clone()))
        .collect();
    let mut t = ReportTable::new("Error ratios", "Category", columns);
    for row in counts.rows() {
        let (label, depth) = category_label(tax, &row.category);
        let cells = row
            .counts
            .iter()
            .map(|&(ok, err)| match ok + err {
                0 => Cell::Empty,
                total => Cell::Ratio(err as f64 / total as f64),
            })
            .collect();
        t.push(&row.category, label, depth, cells);
    }
    t
}

/// Kappa per category and system, plus the concatenation column and the two
/// summary rows.
pub fn kappa_table(r: &KappaReport, tax: Option<&Taxonomy>) -> ReportTable {
    let columns = r
        .columns
        .iter()
        .map(|c| match c {
            KappaColumn::System(s) => Column::new(s.clone(), s.clone()),
            KappaColumn::Concat => Column::new("concat", "Concat"),
        })
        .collect();
    let mut t = ReportTable::new("Inter-annotator agreement (Cohen's kappa)", "Category", columns);
    for row in &r.rows {
        let (key, label, depth) = match &row.key {
            KappaRowKey::Category(id) => {
                let (label, depth) = category_label(tax, id);
                (id.clone(), label, depth)
            }
            KappaRowKey::AllErrors => ("all_errors".to_owned(), "All errors".to_owned(), 0),
            KappaRowKey::AnyErrors => ("any_errors".to_owned(), "Any errors".to_owned(), 0),
        };
        t.push(
            key,
            label,
            depth,
            row.cells.iter().map(|k| Cell::Kappa(k.kappa)).collect(),
        );
    }
    t
}

fn level_label(level: ScopeLevel) -> &'static str {
    match level {
        ScopeLevel::Phrase => "Phrase",
        ScopeLevel::Sentence => "Sentence",
    }
}

/// Raw scoped agreement-error counts: each level total followed by its
/// elements.
pub fn scope_count_report(c: &ScopeCountTable) -> ReportTable {
    let columns = c.systems().iter().map(|s| Column::new(s.clone(), s.clone())).collect();
    let mut t = ReportTable::new("Agreement errors by scope", "Scope", columns);
    for level in ScopeLevel::ALL {
        let cells = c
            .systems()
            .iter()
            .map(|s| Cell::Count(c.level_total(s, level)))
            .collect();
        t.push(format!("total.{level}"), level_label(level), 0, cells);
        for e in c.elements(level) {
            let cells = c.systems().iter().map(|s| Cell::Count(c.count(s, level, e))).collect();
            t.push(format!("{level}.{e}"), e.as_str(), 1, cells);
        }
    }
    t
}

pub fn scope_significance_report(s: &ScopeSignificance) -> ReportTable {
    let mut t = ReportTable::new(
        "Token-normalized agreement scope significance",
        "Scope",
        count_and_test_columns(&s.systems, &s.pairs),
    );
    for row in &s.rows {
        let (label, depth) = match row.element {
            None => (format!("{} (total)", level_label(row.level)), 0),
            Some(e) => (format!("{} / {}", level_label(row.level), e), 1),
        };
        t.push(&row.key, label, depth, count_and_test_cells(&row.counts, &row.tests));
    }
    t
}
