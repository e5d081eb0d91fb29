//! Token-normalized error ratios and pairwise chi-squared significance.

mod chi2;
mod ratio;
mod significance;
pub mod special;

use serde::Serialize;
use thiserror::Error;

pub use chi2::{chi_squared_2x2, ChiSquareResult, ContingencyTable2x2, LowerError};
pub use ratio::{error_ratio, relative_reduction, ErrorRatio};
pub use significance::{
    significance_matrix, total_error_summary, Direction, PairMode, PairTest, SignificanceMatrix, SignificanceOptions,
    SignificanceRow, Stars, SystemRatio, TotalSummary, DEFAULT_MIN_EXPECTED, HIGHLY_SIGNIFICANT_P, SIGNIFICANT_P,
};

/// Category key of the "any error" row in count tables.
pub const TOTAL_KEY: &str = "TOTAL";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("total token count is zero")]
    ZeroTotal,
    #[error("{err} error tokens exceed the total of {total}")]
    ErrorsExceedTotal { err: u64, total: u64 },
    #[error("contingency table {table:?} has a zero marginal")]
    NotTestable { table: ContingencyTable2x2 },
    #[error("counts file line {line}: {message}")]
    Counts { line: u64, message: String },
    #[error("count table has no `{TOTAL_KEY}` row")]
    MissingTotal,
    #[error("need at least two systems, got {0}")]
    TooFewSystems(usize),
    #[error("row `{category}` has {got} system columns, expected {expected}")]
    RowWidth {
        category: String,
        got: usize,
        expected: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CountRow {
    pub category: String,
    /// `(ok, err)` per system.
    pub counts: Vec<(u64, u64)>,
}

/// OK / error token counts per category and system.
///
/// Built from an annotated dataset (see `corpus::count_table`) or read from a
/// counts file with columns `category_id,system_id,ok,err`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CountTable {
    systems: Vec<String>,
    rows: Vec<CountRow>,
}

impl CountTable {
    pub fn new(systems: Vec<String>) -> Self {
        Self {
            systems,
            rows: Vec::new(),
        }
    }

    pub fn systems(&self) -> &[String] {
        &self.systems
    }

    pub fn rows(&self) -> &[CountRow] {
        &self.rows
    }

    pub fn row(&self, category: &str) -> Option<&CountRow> {
        self.rows.iter().find(|r| r.category == category)
    }

    pub fn push_row(&mut self, category: &str, counts: Vec<(u64, u64)>) -> Result<(), StatsError> {
        if counts.len() != self.systems.len() {
            return Err(StatsError::RowWidth {
                category: category.to_owned(),
                got: counts.len(),
                expected: self.systems.len(),
            });
        }
        self.rows.push(CountRow {
            category: category.to_owned(),
            counts,
        });
        Ok(())
    }

    /// Parses a counts file. Systems and categories keep first-seen order;
    /// every category must list every system exactly once.
    pub fn from_csv(text: &str) -> Result<Self, StatsError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let bad = |line: u64, message: String| StatsError::Counts { line, message };

        let headers = rdr.headers().map_err(|e| bad(1, e.to_string()))?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| bad(1, format!("missing column `{name}`")))
        };
        let (ci, si, oi, ei) = (col("category_id")?, col("system_id")?, col("ok")?, col("err")?);

        let mut systems: Vec<String> = Vec::new();
        type Cells = Vec<Option<(u64, u64)>>;
        let mut cells: Vec<(String, Cells)> = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| bad(e.position().map_or(0, |p| p.line()), e.to_string()))?;
            let line = rec.position().map_or(0, |p| p.line());
            let field = |i: usize| rec.get(i).unwrap_or("");
            let num = |i: usize, what: &str| {
                field(i)
                    .parse::<u64>()
                    .map_err(|_| bad(line, format!("`{}` is not a valid {what} count", field(i))))
            };
            let (cat, sys) = (field(ci), field(si));
            if cat.is_empty() || sys.is_empty() {
                return Err(bad(line, "empty category or system id".into()));
            }
            let ok = num(oi, "ok")?;
            let err = num(ei, "err")?;

            let s = match systems.iter().position(|x| x == sys) {
                Some(s) => s,
                None => {
                    systems.push(sys.to_owned());
                    for (_, row) in cells.iter_mut() {
                        row.push(None);
                    }
                    systems.len() - 1
                }
            };
            let r = match cells.iter().position(|(c, _)| c == cat) {
                Some(r) => r,
                None => {
                    cells.push((cat.to_owned(), vec![None; systems.len()]));
                    cells.len() - 1
                }
            };
            if cells[r].1[s].replace((ok, err)).is_some() {
                return Err(bad(line, format!("duplicate entry for `{cat}` / `{sys}`")));
            }
        }

        let mut table = CountTable::new(systems);
        for (cat, row) in cells {
            let mut counts = Vec::with_capacity(row.len());
            for (s, c) in row.into_iter().enumerate() {
                counts.push(c.ok_or_else(|| {
                    bad(
                        0,
                        format!("category `{cat}` has no entry for system `{}`", table.systems[s]),
                    )
                })?);
            }
            table.push_row(&cat, counts)?;
        }
        Ok(table)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("category_id,system_id,ok,err\n");
        for row in &self.rows {
            for (s, (ok, err)) in self.systems.iter().zip(&row.counts) {
                out.push_str(&format!("{},{s},{ok},{err}\n", row.category));
            }
        }
        out
    }
}
