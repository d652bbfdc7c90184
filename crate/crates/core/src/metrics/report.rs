use serde::{Deserialize, Serialize};

use super::entropy::{homonymy, synonymy, word_order_freedom, EntropyConfig};
use super::{gen_score, mean_word_length, ngram_diversity, ratio_unique_labels, topsim, Corpus, Metric};

/// Column names, in report order.
pub const METRIC_NAMES: [&str; 9] = [
    "percCom",
    "topsim",
    "synonymy",
    "homonymy",
    "freedom",
    "genScore",
    "ngramDiversity",
    "ratioUniLabels",
    "meanWordLength",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricReport {
    pub perc_com: Metric,
    pub top_sim: Metric,
    pub synonymy: Metric,
    pub homonymy: Metric,
    pub freedom: Metric,
    pub gen_score: Metric,
    pub ngram_diversity: Metric,
    pub ratio_uni_labels: Metric,
    pub mean_word_length: Metric,
}

impl MetricReport {
    /// Computes every metric on `corpus`. `novel` supplies labels for unseen
    /// meanings (GenScore); `perc_com` is passed through from trial outcomes.
    /// Metrics whose preconditions fail are reported as null.
    pub fn compute(corpus: &Corpus, novel: Option<&Corpus>, perc_com: Option<f64>, cfg: &EntropyConfig) -> Self {
        let or_null = |r: Result<Metric, super::MetricError>| r.unwrap_or_else(|_| Metric::null());
        MetricReport {
            perc_com: perc_com.map_or_else(Metric::null, Metric::defined),
            top_sim: or_null(topsim(corpus)),
            synonymy: or_null(synonymy(corpus, cfg)),
            homonymy: or_null(homonymy(corpus)),
            freedom: or_null(word_order_freedom(corpus)),
            gen_score: novel.map_or_else(Metric::null, |n| or_null(gen_score(corpus, n))),
            ngram_diversity: or_null(ngram_diversity(corpus)),
            ratio_uni_labels: or_null(ratio_unique_labels(corpus)),
            mean_word_length: or_null(mean_word_length(corpus)),
        }
    }

    pub fn get(&self, name: &str) -> Option<Metric> {
        Some(match name {
            "percCom" => self.perc_com,
            "topsim" => self.top_sim,
            "synonymy" => self.synonymy,
            "homonymy" => self.homonymy,
            "freedom" => self.freedom,
            "genScore" => self.gen_score,
            "ngramDiversity" => self.ngram_diversity,
            "ratioUniLabels" => self.ratio_uni_labels,
            "meanWordLength" => self.mean_word_length,
            _ => return None,
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, Metric)> + '_ {
        METRIC_NAMES.iter().map(move |&n| (n, self.get(n).expect("known metric")))
    }

    /// Element-wise mean of two reports (the pair-level value of a round).
    /// A value is defined only when both inputs are.
    pub fn average(a: &MetricReport, b: &MetricReport) -> MetricReport {
        let avg = |x: Metric, y: Metric| match (x.value, y.value) {
            (Some(u), Some(v)) => Metric { value: Some((u + v) / 2.0), defined: x.defined && y.defined },
            (Some(u), None) | (None, Some(u)) => Metric { value: Some(u), defined: false },
            (None, None) => Metric::null(),
        };
        MetricReport {
            perc_com: avg(a.perc_com, b.perc_com),
            top_sim: avg(a.top_sim, b.top_sim),
            synonymy: avg(a.synonymy, b.synonymy),
            homonymy: avg(a.homonymy, b.homonymy),
            freedom: avg(a.freedom, b.freedom),
            gen_score: avg(a.gen_score, b.gen_score),
            ngram_diversity: avg(a.ngram_diversity, b.ngram_diversity),
            ratio_uni_labels: avg(a.ratio_uni_labels, b.ratio_uni_labels),
            mean_word_length: avg(a.mean_word_length, b.mean_word_length),
        }
    }
}
