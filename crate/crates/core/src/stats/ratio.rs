use serde::{Deserialize, Serialize};

use super::StatsError;

/// Tokens with errors over total output tokens (phantoms included).
///
/// The exact fraction is kept; [`ErrorRatio::ratio`] gives the float.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorRatio {
    pub numerator: u64,
    pub denominator: u64,
}

impl ErrorRatio {
    pub fn ratio(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }

    /// Count of tokens without errors.
    pub fn ok(&self) -> u64 {
        self.denominator - self.numerator
    }
}

pub fn error_ratio(err: u64, total: u64) -> Result<ErrorRatio, StatsError> {
    if total == 0 {
        return Err(StatsError::ZeroTotal);
    }
    if err > total {
        return Err(StatsError::ErrorsExceedTotal { err, total });
    }
    Ok(ErrorRatio {
        numerator: err,
        denominator: total,
    })
}

/// `(from - to) / from`: the relative drop in an error count.
pub fn relative_reduction(from: u64, to: u64) -> Option<f64> {
    (from != 0).then(|| (from as f64 - to as f64) / from as f64)
}
