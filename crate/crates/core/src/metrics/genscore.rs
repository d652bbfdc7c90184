use super::value::pearson;
use super::{Corpus, Metric, MetricError};
use crate::language::{meaning_distance, normalized_edit_distance};

/// Pearson correlation, over all (test, train) item pairs, between meaning
/// similarity `1 - hamming/3` and label similarity `1 - normalized edit distance`.
pub fn gen_score(train: &Corpus, test: &Corpus) -> Result<Metric, MetricError> {
    if train.is_empty() || test.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    if test.meanings().any(|m| train.meanings().any(|t| t == m)) {
        return Err(MetricError::OverlappingMeanings);
    }
    let mut ms = Vec::with_capacity(train.len() * test.len());
    let mut ls = Vec::with_capacity(train.len() * test.len());
    for (tm, tl) in &test.pairs {
        for (rm, rl) in &train.pairs {
            ms.push(1.0 - meaning_distance(tm, rm) as f64 / 3.0);
            ls.push(1.0 - normalized_edit_distance(tl.as_str(), rl.as_str()));
        }
    }
    Ok(pearson(&ms, &ls).map_or_else(Metric::undefined_zero, Metric::defined))
}
