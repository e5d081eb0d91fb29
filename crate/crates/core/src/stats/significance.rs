use serde::{Deserialize, Serialize};

use super::{
    chi_squared_2x2, error_ratio, ChiSquareResult, ContingencyTable2x2, CountTable, ErrorRatio, StatsError, TOTAL_KEY,
};

/// p below this earns one star.
pub const SIGNIFICANT_P: f64 = 0.05;
/// p below this earns two stars.
pub const HIGHLY_SIGNIFICANT_P: f64 = 0.0001;
/// Cochran's rule: chi-squared is not trusted when an expected count is below this.
pub const DEFAULT_MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub enum Stars {
    #[default]
    None,
    One,
    Two,
}

impl Stars {
    pub fn from_p(p: f64) -> Self {
        if p < HIGHLY_SIGNIFICANT_P {
            Stars::Two
        } else if p < SIGNIFICANT_P {
            Stars::One
        } else {
            Stars::None
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stars::None => "",
            Stars::One => "*",
            Stars::Two => "**",
        }
    }
}

impl Serialize for Stars {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Stars {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match String::deserialize(d)?.as_str() {
            "" => Ok(Stars::None),
            "*" => Ok(Stars::One),
            "**" => Ok(Stars::Two),
            other => Err(serde::de::Error::custom(format!("bad star mark `{other}`"))),
        }
    }
}

/// How the right-hand system of a pair compares to the left-hand one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Lower error ratio.
    Improvement,
    /// Higher error ratio.
    Regression,
    Unchanged,
}

impl Direction {
    pub fn symbol(self) -> &'static str {
        match self {
            Direction::Improvement => "+",
            Direction::Regression => "\u{2212}",
            Direction::Unchanged => "",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PairMode {
    /// Each system against the one before it.
    #[default]
    Adjacent,
    /// Every unordered pair, in column order.
    All,
}

impl PairMode {
    pub fn pairs(self, n: usize) -> Vec<(usize, usize)> {
        match self {
            PairMode::Adjacent => (1..n).map(|i| (i - 1, i)).collect(),
            PairMode::All => (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignificanceOptions {
    /// Tables whose smallest expected count falls below this get no stars.
    /// Zero disables the check.
    pub min_expected: f64,
}

impl Default for SignificanceOptions {
    fn default() -> Self {
        Self {
            min_expected: DEFAULT_MIN_EXPECTED,
        }
    }
}

/// One chi-squared comparison with its presentation marks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTest {
    pub table: ContingencyTable2x2,
    /// `None` when a marginal is zero.
    pub result: Option<ChiSquareResult>,
    pub stars: Stars,
    pub direction: Direction,
    pub low_expected: bool,
}

impl PairTest {
    pub fn evaluate(table: ContingencyTable2x2, opts: &SignificanceOptions) -> Self {
        let result = chi_squared_2x2(&table).ok();
        let direction = match result.as_ref().map(|r| r.lower_error) {
            Some(super::LowerError::B) => Direction::Improvement,
            Some(super::LowerError::A) => Direction::Regression,
            _ => {
                // Untestable tables still get a direction from the raw ratios.
                let a = table.err_a as u128 * (table.ok_b + table.err_b) as u128;
                let b = table.err_b as u128 * (table.ok_a + table.err_a) as u128;
                match b.cmp(&a) {
                    std::cmp::Ordering::Less => Direction::Improvement,
                    std::cmp::Ordering::Greater => Direction::Regression,
                    std::cmp::Ordering::Equal => Direction::Unchanged,
                }
            }
        };
        let low_expected = result.as_ref().is_some_and(|r| r.min_expected < opts.min_expected);
        let stars = match &result {
            Some(r) if !low_expected => Stars::from_p(r.p),
            _ => Stars::None,
        };
        Self {
            table,
            result,
            stars,
            direction,
            low_expected,
        }
    }

    pub fn p(&self) -> Option<f64> {
        self.result.as_ref().map(|r| r.p)
    }

    pub fn is_significant(&self) -> bool {
        self.stars != Stars::None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignificanceRow {
    pub category: String,
    /// `(ok, err)` per system, in column order.
    pub counts: Vec<(u64, u64)>,
    /// One test per pair of [`SignificanceMatrix::pairs`].
    pub tests: Vec<PairTest>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignificanceMatrix {
    pub systems: Vec<String>,
    pub mode: PairMode,
    pub pairs: Vec<(usize, usize)>,
    pub rows: Vec<SignificanceRow>,
}

impl SignificanceMatrix {
    pub fn row(&self, category: &str) -> Option<&SignificanceRow> {
        self.rows.iter().find(|r| r.category == category)
    }

    /// Test for `category` between two named systems, if that pair was run.
    pub fn test(&self, category: &str, a: &str, b: &str) -> Option<&PairTest> {
        let ia = self.systems.iter().position(|s| s == a)?;
        let ib = self.systems.iter().position(|s| s == b)?;
        let k = self.pairs.iter().position(|&p| p == (ia, ib))?;
        self.row(category).map(|r| &r.tests[k])
    }
}

/// Runs the pairwise chi-squared test for every category row of `counts`.
pub fn significance_matrix(
    counts: &CountTable,
    mode: PairMode,
    opts: &SignificanceOptions,
) -> Result<SignificanceMatrix, StatsError> {
    let systems = counts.systems().to_vec();
    if systems.len() < 2 {
        return Err(StatsError::TooFewSystems(systems.len()));
    }
    let pairs = mode.pairs(systems.len());
    let rows = counts
        .rows()
        .iter()
        .map(|row| {
            let tests = pairs
                .iter()
                .map(|&(i, j)| {
                    let t =
                        ContingencyTable2x2::new(systems[i].clone(), row.counts[i], systems[j].clone(), row.counts[j]);
                    PairTest::evaluate(t, opts)
                })
                .collect();
            SignificanceRow {
                category: row.category.clone(),
                counts: row.counts.clone(),
                tests,
            }
        })
        .collect();
    Ok(SignificanceMatrix {
        systems,
        mode,
        pairs,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemRatio {
    pub system: String,
    pub ratio: ErrorRatio,
}

/// Overall error ratio per system and the test for every system pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TotalSummary {
    pub ratios: Vec<SystemRatio>,
    pub tests: Vec<PairTest>,
}

impl TotalSummary {
    /// Systems from highest to lowest error ratio.
    pub fn ranking(&self) -> Vec<&SystemRatio> {
        let mut v: Vec<&SystemRatio> = self.ratios.iter().collect();
        v.sort_by(|a, b| b.ratio.ratio().total_cmp(&a.ratio.ratio()));
        v
    }
}

pub fn total_error_summary(counts: &CountTable, opts: &SignificanceOptions) -> Result<TotalSummary, StatsError> {
    let row = counts.row(TOTAL_KEY).ok_or(StatsError::MissingTotal)?;
    let systems = counts.systems();
    if systems.len() < 2 {
        return Err(StatsError::TooFewSystems(systems.len()));
    }
    let ratios = systems
        .iter()
        .zip(&row.counts)
        .map(|(s, &(ok, err))| {
            Ok(SystemRatio {
                system: s.clone(),
                ratio: error_ratio(err, ok + err)?,
            })
        })
        .collect::<Result<Vec<_>, StatsError>>()?;
    let tests = PairMode::All
        .pairs(systems.len())
        .into_iter()
        .map(|(i, j)| {
            PairTest::evaluate(
                ContingencyTable2x2::new(systems[i].clone(), row.counts[i], systems[j].clone(), row.counts[j]),
                opts,
            )
        })
        .collect();
    Ok(TotalSummary { ratios, tests })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[(&str, [(u64, u64); 3])]) -> CountTable {
        let mut t = CountTable::new(vec!["pbmt".into(), "factored".into(), "nmt".into()]);
        for (cat, counts) in rows {
            t.push_row(cat, counts.to_vec()).unwrap();
        }
        t
    }

    #[test]
    fn star_thresholds() {
        assert_eq!(Stars::from_p(0.05), Stars::None);
        assert_eq!(Stars::from_p(0.0499), Stars::One);
        assert_eq!(Stars::from_p(0.0001), Stars::One);
        assert_eq!(Stars::from_p(0.00009), Stars::Two);
    }

    #[test]
    fn pair_modes() {
        assert_eq!(PairMode::Adjacent.pairs(3), [(0, 1), (1, 2)]);
        assert_eq!(PairMode::All.pairs(3), [(0, 1), (0, 2), (1, 2)]);
        assert!(PairMode::All.pairs(1).is_empty());
    }

    #[test]
    fn accuracy_and_omission_rows() {
        let t = table(&[
            ("accuracy", [(3467, 369), (3525, 291), (3402, 266)]),
            ("accuracy.omission", [(3801, 35), (3793, 23), (3619, 49)]),
        ]);
        let m = significance_matrix(&t, PairMode::Adjacent, &SignificanceOptions::default()).unwrap();
        let acc = m.test("accuracy", "pbmt", "factored").unwrap();
        assert_eq!(acc.stars, Stars::One);
        assert_eq!(acc.direction, Direction::Improvement);
        let om = m.test("accuracy.omission", "factored", "nmt").unwrap();
        assert_eq!(om.stars, Stars::One);
        assert_eq!(om.direction, Direction::Regression);
        assert!(m.test("accuracy", "pbmt", "nmt").is_none());
    }

    #[test]
    fn identical_rows_have_no_star() {
        let t = table(&[("x", [(100, 10), (100, 10), (100, 10)])]);
        let m = significance_matrix(&t, PairMode::All, &SignificanceOptions::default()).unwrap();
        for test in &m.rows[0].tests {
            assert_eq!(test.stars, Stars::None);
            assert_eq!(test.direction, Direction::Unchanged);
            assert_eq!(test.p(), Some(1.0));
        }
    }

    #[test]
    fn low_expected_counts_withhold_stars_but_keep_p() {
        let t = table(&[("person", [(3836, 0), (3816, 0), (3664, 4)])]);
        let m = significance_matrix(&t, PairMode::Adjacent, &SignificanceOptions::default()).unwrap();
        let first = &m.rows[0].tests[0];
        assert!(first.result.is_none());
        let second = &m.rows[0].tests[1];
        assert!(second.low_expected);
        assert!(second.p().unwrap() < 0.05);
        assert_eq!(second.stars, Stars::None);

        let lax = SignificanceOptions { min_expected: 0.0 };
        let m = significance_matrix(&t, PairMode::Adjacent, &lax).unwrap();
        assert_eq!(m.rows[0].tests[1].stars, Stars::One);
    }

    #[test]
    fn totals_summary() {
        let t = table(&[(TOTAL_KEY, [(2826, 1010), (3007, 809), (3199, 469)])]);
        let s = total_error_summary(&t, &SignificanceOptions::default()).unwrap();
        assert_eq!(s.tests.len(), 3);
        assert!(s.tests.iter().all(|t| t.p().unwrap() < 0.0001));
        let order: Vec<&str> = s.ranking().iter().map(|r| r.system.as_str()).collect();
        assert_eq!(order, ["pbmt", "factored", "nmt"]);

        let same = table(&[(TOTAL_KEY, [(90, 10), (90, 10), (90, 10)])]);
        let s = total_error_summary(&same, &SignificanceOptions::default()).unwrap();
        assert!(s.tests.iter().all(|t| t.p() == Some(1.0)));
    }

    #[test]
    fn summary_requires_total_row() {
        let t = table(&[("x", [(1, 1), (1, 1), (1, 1)])]);
        assert_eq!(
            total_error_summary(&t, &SignificanceOptions::default()),
            Err(StatsError::MissingTotal)
        );
    }
}
