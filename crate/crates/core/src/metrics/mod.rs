//! Language metrics computed over corpora of produced labels.

mod corpus;
mod entropy;
mod genscore;
mod report;
mod surface;
mod topsim;
mod value;

use thiserror::Error;

pub use corpus::Corpus;
pub use entropy::{
    form_stats, freedom_for, homonymy, homonymy_for, synonymy, synonymy_for, word_order_freedom,
    EntropyConfig, FormStats, PositionStats,
};
pub use genscore::gen_score;
pub use report::{MetricReport, METRIC_NAMES};
pub use surface::{mean_word_length, mean_word_length_raw, ngram_diversity, ratio_unique_labels, NGRAM_ORDERS};
pub use topsim::topsim;
pub use value::Metric;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("need at least {needed} distinct meanings, got {got}")]
    TooFewMeanings { needed: usize, got: usize },
    #[error("training and testing corpora share meanings")]
    OverlappingMeanings,
}

/// Fraction of successful trials among valid ones; `None` with no valid trials.
pub fn perc_com(outcomes: &[Option<bool>]) -> Option<f64> {
    let valid: Vec<bool> = outcomes.iter().flatten().copied().collect();
    if valid.is_empty() {
        return None;
    }
    Some(valid.iter().filter(|&&s| s).count() as f64 / valid.len() as f64)
}
