use serde::{Deserialize, Serialize};

use super::{special::erfc, StatsError};

/// Token counts of two systems: rows are systems, columns are OK / error.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable2x2 {
    pub system_a: String,
    pub system_b: String,
    pub ok_a: u64,
    pub err_a: u64,
    pub ok_b: u64,
    pub err_b: u64,
}

impl ContingencyTable2x2 {
    pub fn new(
        system_a: impl Into<String>,
        (ok_a, err_a): (u64, u64),
        system_b: impl Into<String>,
        (ok_b, err_b): (u64, u64),
    ) -> Self {
        Self {
            system_a: system_a.into(),
            system_b: system_b.into(),
            ok_a,
            err_a,
            ok_b,
            err_b,
        }
    }

    /// Anonymous table, handy for ad-hoc tests.
    pub fn from_counts(ok_a: u64, err_a: u64, ok_b: u64, err_b: u64) -> Self {
        Self::new("a", (ok_a, err_a), "b", (ok_b, err_b))
    }

    pub fn total(&self) -> u64 {
        self.ok_a + self.err_a + self.ok_b + self.err_b
    }

    /// `[row_a, row_b, col_ok, col_err]`
    pub fn marginals(&self) -> [u64; 4] {
        [
            self.ok_a + self.err_a,
            self.ok_b + self.err_b,
            self.ok_a + self.ok_b,
            self.err_a + self.err_b,
        ]
    }

    /// Smallest expected cell count under independence.
    pub fn min_expected(&self) -> f64 {
        let [ra, rb, cok, cerr] = self.marginals();
        let n = self.total() as f64;
        (ra.min(rb) as f64) * (cok.min(cerr) as f64) / n
    }

    pub fn swapped(&self) -> Self {
        Self {
            system_a: self.system_b.clone(),
            system_b: self.system_a.clone(),
            ok_a: self.ok_b,
            err_a: self.err_b,
            ok_b: self.ok_a,
            err_b: self.err_a,
        }
    }
}

/// Which system of the pair has the lower error ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowerError {
    A,
    B,
    Equal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub chi2: f64,
    pub p: f64,
    pub dof: u32,
    pub lower_error: LowerError,
    pub min_expected: f64,
}

/// Pearson's chi-squared test of independence on a 2x2 table, without
/// continuity correction, one degree of freedom.
///
/// Uses the closed form `n (ad - bc)^2 / (r1 r2 c1 c2)` with exact integer
/// arithmetic wherever it fits in 128 bits. A zero marginal makes the test
/// undefined and yields [`StatsError::NotTestable`].
pub fn chi_squared_2x2(t: &ContingencyTable2x2) -> Result<ChiSquareResult, StatsError> {
    let marg = t.marginals();
    if marg.contains(&0) {
        return Err(StatsError::NotTestable { table: t.clone() });
    }
    let chi2 = pearson_statistic(t);
    // Survival function of chi-squared with 1 dof.
    let p = erfc((chi2 / 2.0).sqrt()).clamp(0.0, 1.0);

    let lhs = t.err_a as u128 * (t.ok_b + t.err_b) as u128;
    let rhs = t.err_b as u128 * (t.ok_a + t.err_a) as u128;
    let lower_error = match lhs.cmp(&rhs) {
        std::cmp::Ordering::Less => LowerError::A,
        std::cmp::Ordering::Greater => LowerError::B,
        std::cmp::Ordering::Equal => LowerError::Equal,
    };
    Ok(ChiSquareResult {
        chi2,
        p,
        dof: 1,
        lower_error,
        min_expected: t.min_expected(),
    })
}

fn pearson_statistic(t: &ContingencyTable2x2) -> f64 {
    let [ra, rb, cok, cerr] = marg_u128(t);
    let n = ra + rb;
    let ad = t.ok_a as u128 * t.err_b as u128;
    let bc = t.err_a as u128 * t.ok_b as u128;
    let diff = ad.abs_diff(bc);

    let exact = diff.checked_mul(diff).and_then(|d2| d2.checked_mul(n)).zip(
        ra.checked_mul(rb)
            .and_then(|x| x.checked_mul(cok))
            .and_then(|x| x.checked_mul(cerr)),
    );
    match exact {
        Some((num, den)) => ratio_u128(num, den),
        None => {
            let d = diff as f64;
            (n as f64) * (d / (ra as f64 * rb as f64)) * (d / (cok as f64 * cerr as f64))
        }
    }
}

fn marg_u128(t: &ContingencyTable2x2) -> [u128; 4] {
    t.marginals().map(u128::from)
}

/// `num / den` correctly rounded up to a couple of ulps, even when both
/// exceed the 53-bit mantissa.
fn ratio_u128(num: u128, den: u128) -> f64 {
    let q = num / den;
    let r = num % den;
    q as f64 + r as f64 / den as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proportional_rows_give_zero() {
        let r = chi_squared_2x2(&ContingencyTable2x2::from_counts(100, 10, 200, 20)).unwrap();
        assert_eq!(r.chi2, 0.0);
        assert_eq!(r.p, 1.0);
        assert_eq!(r.lower_error, LowerError::Equal);
    }

    #[test]
    fn zero_marginal_is_not_testable() {
        let t = ContingencyTable2x2::from_counts(3836, 0, 3816, 0);
        assert!(matches!(chi_squared_2x2(&t), Err(StatsError::NotTestable { .. })));
        let t = ContingencyTable2x2::from_counts(0, 0, 5, 5);
        assert!(chi_squared_2x2(&t).is_err());
    }

    #[test]
    fn published_sentence_agreement_values() {
        let r = chi_squared_2x2(&ContingencyTable2x2::from_counts(1835, 64, 1827, 62)).unwrap();
        assert!((r.p - 0.8799).abs() < 5e-5, "{}", r.p);
        let r = chi_squared_2x2(&ContingencyTable2x2::from_counts(1827, 62, 1814, 22)).unwrap();
        assert!((r.p - 0.00002).abs() < 5e-6, "{}", r.p);
        assert_eq!(r.lower_error, LowerError::B);
    }

    #[test]
    fn swap_invariance() {
        let t = ContingencyTable2x2::from_counts(1811, 88, 1835, 54);
        let a = chi_squared_2x2(&t).unwrap();
        let b = chi_squared_2x2(&t.swapped()).unwrap();
        assert_eq!(a.chi2, b.chi2);
        assert_eq!(a.lower_error, LowerError::B);
        assert_eq!(b.lower_error, LowerError::A);
    }

    #[test]
    fn huge_counts_fall_back_to_float() {
        let t = ContingencyTable2x2::from_counts(u64::MAX / 8, 1 << 40, u64::MAX / 9, 1 << 41);
        let r = chi_squared_2x2(&t).unwrap();
        assert!(r.chi2.is_finite() && r.chi2 > 0.0);
    }

    #[test]
    fn min_expected_of_sparse_table() {
        let t = ContingencyTable2x2::from_counts(3816, 0, 3664, 4);
        let e = t.min_expected();
        assert!((e - 4.0 * 3668.0 / 7484.0).abs() < 1e-12);
    }
}
