use serde::Serialize;

use super::dist::t_two_sided;
use super::{check_finite, mean, sample_var, StatsError};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TestResult {
    /// t for the t-tests, r for the Pearson test.
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
    /// Cohen's d for the t-tests.
    pub effect_size: Option<f64>,
    pub mean_a: f64,
    pub mean_b: f64,
    pub sd_a: f64,
    pub sd_b: f64,
}

fn prepare(a: &[f64], b: &[f64], min: usize) -> Result<(), StatsError> {
    check_finite(a)?;
    check_finite(b)?;
    let n = a.len().min(b.len());
    if n < min {
        return Err(StatsError::TooFew { needed: min, got: n });
    }
    Ok(())
}

/// Paired t-test of `a − b` against zero; d = mean(diff) / sd(diff).
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    prepare(a, b, 2)?;
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = diff.len() as f64;
    let md = mean(&diff);
    let sd = sample_var(&diff).sqrt();
    if sd <= f64::EPSILON * md.abs().max(1.0) {
        return Err(StatsError::ZeroVariance);
    }
    let t = md / (sd / n.sqrt());
    let df = n - 1.0;
    Ok(TestResult {
        statistic: t,
        df,
        p_value: t_two_sided(t, df),
        effect_size: Some(md / sd),
        mean_a: mean(a),
        mean_b: mean(b),
        sd_a: sample_var(a).sqrt(),
        sd_b: sample_var(b).sqrt(),
    })
}

/// Welch's unequal-variance t-test with Welch–Satterthwaite df. The effect
/// size uses the root mean of the two variances.
pub fn welch_ttest(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    prepare(a, b, 2)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (sample_var(a), sample_var(b));
    if va <= 0.0 || vb <= 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let (ma, mb) = (mean(a), mean(b));
    let (sa, sb) = (va / na, vb / nb);
    let t = (ma - mb) / (sa + sb).sqrt();
    let df = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok(TestResult {
        statistic: t,
        df,
        p_value: t_two_sided(t, df),
        effect_size: Some((ma - mb) / ((va + vb) / 2.0).sqrt()),
        mean_a: ma,
        mean_b: mb,
        sd_a: va.sqrt(),
        sd_b: vb.sqrt(),
    })
}

/// Pearson's r with a two-sided p from t = r·sqrt((n−2)/(1−r²)).
pub fn pearson_test(x: &[f64], y: &[f64]) -> Result<TestResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    prepare(x, y, 3)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = x.len() as f64 - 2.0;
    let p = if r.abs() >= 1.0 { 0.0 } else { t_two_sided(r * (df / (1.0 - r * r)).sqrt(), df) };
    Ok(TestResult {
        statistic: r,
        df,
        p_value: p,
        effect_size: None,
        mean_a: mx,
        mean_b: my,
        sd_a: sample_var(x).sqrt(),
        sd_b: sample_var(y).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paired_hand_example() {
        let r = paired_ttest(&[2.0, 4.0, 7.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((r.statistic - 4.0).abs() < 1e-12);
        assert_eq!(r.df, 2.0);
        // d = (4/3) / (1/sqrt 3)
        assert!((r.effect_size.unwrap() - 4.0 / 3.0 * 3f64.sqrt()).abs() < 1e-12);
        // df = 2: p = 1 - t / sqrt(2 + t^2)
        assert!((r.p_value - (1.0 - 4.0 / 18f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn paired_constant_shift_is_degenerate() {
        assert_eq!(paired_ttest(&[2.0, 4.0, 6.0], &[1.0, 3.0, 5.0]), Err(StatsError::ZeroVariance));
        assert!(matches!(paired_ttest(&[1.0], &[2.0]), Err(StatsError::TooFew { .. })));
        assert!(matches!(paired_ttest(&[1.0, 2.0], &[2.0]), Err(StatsError::LengthMismatch(..))));
    }

    #[test]
    fn welch_equals_pooled_for_equal_variance_and_n() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [2.5, 3.5, 4.5, 5.5];
        let r = welch_ttest(&a, &b).unwrap();
        let sp2 = (sample_var(&a) + sample_var(&b)) / 2.0;
        let pooled = (mean(&a) - mean(&b)) / (sp2 * (2.0 / 4.0)).sqrt();
        assert!((r.statistic - pooled).abs() < 1e-12);
        assert!((r.df - 6.0).abs() < 1e-12);
        assert_eq!(welch_ttest(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]), Err(StatsError::ZeroVariance));
    }

    #[test]
    fn pearson_extremes() {
        let r = pearson_test(&[1.0, 2.0, 3.0, 4.0], &[2.0, 4.0, 6.0, 8.0]).unwrap();
        assert!((r.statistic - 1.0).abs() < 1e-15);
        let r = pearson_test(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap();
        assert!((r.statistic + 1.0).abs() < 1e-15);
        assert_eq!(r.p_value, 0.0);
    }
}
