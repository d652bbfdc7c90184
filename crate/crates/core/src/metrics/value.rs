use serde::{Deserialize, Serialize};

/// A metric result together with whether it is defined on its input.
///
/// Degenerate inputs either yield a conventional value (`value = Some(0.0)`,
/// `defined = false`) or no value at all, depending on the metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub value: Option<f64>,
    pub defined: bool,
}

impl Metric {
    pub fn defined(v: f64) -> Self {
        Metric { value: Some(v), defined: true }
    }

    pub fn undefined_zero() -> Self {
        Metric { value: Some(0.0), defined: false }
    }

    pub fn null() -> Self {
        Metric { value: None, defined: false }
    }

    /// The value, if any, regardless of definedness.
    pub fn get(&self) -> Option<f64> {
        self.value
    }

    /// The value only when defined.
    pub fn defined_value(&self) -> Option<f64> {
        self.value.filter(|_| self.defined)
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Pearson correlation, `None` when either vector is constant.
pub(crate) fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    debug_assert_eq!(x.len(), y.len());
    if x.len() < 2 {
        return None;
    }
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    // Relative guard: a vector of equal floats can leave rounding residue.
    let scale_x: f64 = x.iter().map(|v| v * v).sum::<f64>().max(1.0);
    let scale_y: f64 = y.iter().map(|v| v * v).sum::<f64>().max(1.0);
    if sxx <= 1e-24 * scale_x || syy <= 1e-24 * scale_y {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Average ranks (1-based), ties share the mean of their positions.
pub(crate) fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub(crate) fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson(&average_ranks(x), &average_ranks(y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn pearson_degenerate() {
        assert_eq!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), None);
        assert_eq!(pearson(&[0.1, 0.1, 0.1], &[1.0, 2.0, 3.0]), None);
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-15);
    }
}
