use std::collections::HashSet;

use super::{Corpus, Metric, MetricError};

pub const NGRAM_ORDERS: [usize; 4] = [1, 2, 3, 4];

/// Share of distinct labels among all produced labels.
pub fn ratio_unique_labels(corpus: &Corpus) -> Result<Metric, MetricError> {
    if corpus.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let distinct: HashSet<&str> = corpus.labels().map(|l| l.as_str()).collect();
    Ok(Metric::defined(distinct.len() as f64 / corpus.len() as f64))
}

/// Mean over N in 1..=4 of unique/total character N-grams, pooled across labels.
/// Orders with no N-grams at all are skipped.
pub fn ngram_diversity(corpus: &Corpus) -> Result<Metric, MetricError> {
    if corpus.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let labels: Vec<Vec<char>> = corpus.labels().map(|l| l.as_str().chars().collect()).collect();
    let mut ratios = Vec::new();
    for n in NGRAM_ORDERS {
        let mut total = 0usize;
        let mut unique: HashSet<&[char]> = HashSet::new();
        for chars in &labels {
            for w in chars.windows(n) {
                total += 1;
                unique.insert(w);
            }
        }
        if total > 0 {
            ratios.push(unique.len() as f64 / total as f64);
        }
    }
    Ok(Metric::defined(super::value::mean(&ratios)))
}

pub fn mean_word_length(corpus: &Corpus) -> Result<Metric, MetricError> {
    if corpus.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let total: usize = corpus.labels().map(|l| l.char_len()).sum();
    Ok(Metric::defined(total as f64 / corpus.len() as f64))
}

/// Mean length of raw (possibly empty) label strings. Empty strings are
/// excluded and counted; the result is undefined when none remain.
pub fn mean_word_length_raw(labels: &[&str]) -> (Metric, usize) {
    let kept: Vec<usize> = labels.iter().map(|l| l.chars().count()).filter(|&n| n > 0).collect();
    let excluded = labels.len() - kept.len();
    if kept.is_empty() {
        return (Metric::null(), excluded);
    }
    let mean = kept.iter().sum::<usize>() as f64 / kept.len() as f64;
    let mut m = Metric::defined(mean);
    m.defined = excluded == 0;
    (m, excluded)
}
