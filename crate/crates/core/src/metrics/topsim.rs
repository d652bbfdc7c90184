use super::value::spearman;
use super::{Corpus, Metric, MetricError};
use crate::language::{meaning_distance, normalized_edit_distance};

/// Topographic similarity: Spearman correlation between pairwise Hamming
/// distances of meanings and normalized edit distances of labels, over all
/// unordered item pairs.
pub fn topsim(corpus: &Corpus) -> Result<Metric, MetricError> {
    let distinct = corpus.distinct_meanings();
    if distinct < 3 {
        return Err(MetricError::TooFewMeanings { needed: 3, got: distinct });
    }
    let n = corpus.len();
    let mut md = Vec::with_capacity(n * (n - 1) / 2);
    let mut ld = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let (mi, li) = &corpus.pairs[i];
            let (mj, lj) = &corpus.pairs[j];
            md.push(meaning_distance(mi, mj) as f64);
            ld.push(normalized_edit_distance(li.as_str(), lj.as_str()));
        }
    }
    Ok(spearman(&md, &ld).map_or_else(Metric::undefined_zero, Metric::defined))
}
