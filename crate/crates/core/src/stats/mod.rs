//! Statistics for the evaluation: random-intercept linear mixed models fitted
//! by REML, paired and Welch t-tests, and Pearson correlation tests.

mod cancel;
pub mod dist;
mod formula;
mod htest;
mod lmm;

use thiserror::Error;

pub use cancel::CancelToken;
pub use formula::{Column, DataFrame, Formula, ModelFit, Term};
pub use htest::{paired_ttest, pearson_test, welch_ttest, TestResult};
pub use lmm::{fit_random_intercept_lmm, ols, profiled_reml, Dataset, LmmFit, LmmOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least {needed} observations, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("inputs differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("zero variance")]
    ZeroVariance,
    #[error("non-finite input")]
    NonFinite,
    #[error("design matrix is rank deficient (rank {rank} < {cols} columns)")]
    RankDeficient { rank: usize, cols: usize },
    #[error("need at least 2 groups with some group holding 2+ observations")]
    TooFewGroups,
    #[error("optimizer did not converge in {0} iterations")]
    NotConverged(usize),
    #[error("cancelled")]
    Cancelled,
    #[error("formula: {0}")]
    Formula(String),
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance with n − 1 in the denominator.
pub(crate) fn sample_var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

fn check_finite(x: &[f64]) -> Result<(), StatsError> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::NonFinite)
    }
}
