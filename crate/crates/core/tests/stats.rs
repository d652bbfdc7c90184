use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use refgame::stats::{
    dist, fit_random_intercept_lmm, paired_ttest, pearson_test, profiled_reml, welch_ttest, Dataset, LmmOptions,
};
use statrs::distribution::{ContinuousCDF, StudentsT};

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[test]
fn t_cdf_matches_statrs() {
    for df in [1.0, 2.0, 3.5, 14.0, 28.0, 117.0] {
        let oracle = StudentsT::new(0.0, 1.0, df).unwrap();
        for t in [-8.0, -3.01, -1.0, -0.1, 0.0, 0.4, 1.96, 6.3] {
            let ours = dist::t_cdf(t, df);
            assert!((ours - oracle.cdf(t)).abs() < 1e-10, "df={df} t={t}: {ours} vs {}", oracle.cdf(t));
        }
    }
}

/// OLS via QR, independent of the normal-equation path in the library.
fn qr_ols(x: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    let qr = x.clone().qr();
    let qty = qr.q().transpose() * nalgebra::DVector::from_column_slice(y);
    let beta = qr.r().solve_upper_triangular(&qty).unwrap();
    beta.iter().copied().collect()
}

#[test]
fn zero_group_variance_reduces_to_ols() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let groups = 6;
    let per = 20;
    let n = groups * per;
    let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    // balanced data with no group effect; noise is centred within groups so
    // the group means of the residuals are exactly zero
    let mut y: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
    for g in 0..groups {
        let noise: Vec<f64> = (0..per).map(|_| normal(&mut rng)).collect();
        let m = noise.iter().sum::<f64>() / per as f64;
        for i in 0..per {
            y[g * per + i] += noise[i] - m;
        }
    }
    let x = DMatrix::from_fn(n, 2, |r, c| if c == 0 { 1.0 } else { xs[r] });
    let g: Vec<String> = (0..n).map(|i| (i / per).to_string()).collect();
    let data = Dataset::new(y.clone(), x.clone(), g, vec!["(Intercept)".into(), "x".into()]).unwrap();
    let fit = fit_random_intercept_lmm(&data, &LmmOptions::default()).unwrap();
    let ols = qr_ols(&x, &y);
    for (a, b) in fit.beta.iter().zip(&ols) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
    assert!(fit.sigma_b2 < 1e-6);
}

#[test]
fn balanced_one_way_matches_anova_reml() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for rep in 0..20 {
        let k = 4 + rep % 5;
        let per = 3 + rep % 4;
        let mut y = Vec::new();
        let mut g = Vec::new();
        for j in 0..k {
            let b = 1.5 * normal(&mut rng);
            for _ in 0..per {
                y.push(10.0 + b + normal(&mut rng));
                g.push(j.to_string());
            }
        }
        let n = y.len();
        let grand = y.iter().sum::<f64>() / n as f64;
        let means: Vec<f64> = (0..k).map(|j| y[j * per..(j + 1) * per].iter().sum::<f64>() / per as f64).collect();
        let msb = per as f64 * means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (k - 1) as f64;
        let msw = (0..n).map(|i| (y[i] - means[i / per]).powi(2)).sum::<f64>() / (k * (per - 1)) as f64;
        if msb <= msw {
            continue;
        }
        let data = Dataset::new(y, DMatrix::from_element(n, 1, 1.0), g, vec!["(Intercept)".into()]).unwrap();
        let fit = fit_random_intercept_lmm(&data, &LmmOptions::default()).unwrap();
        assert!((fit.sigma_e2 - msw).abs() < 1e-6, "rep {rep}: {} vs {msw}", fit.sigma_e2);
        assert!((fit.sigma_b2 - (msb - msw) / per as f64).abs() < 1e-6, "rep {rep}");
        assert!((fit.beta[0] - grand).abs() < 1e-9);
    }
}

fn simulate(rng: &mut ChaCha8Rng, beta: f64, groups: usize, n: usize) -> Dataset {
    let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let effects: Vec<f64> = (0..groups).map(|_| 0.05 * normal(rng)).collect();
    let y: Vec<f64> = xs.iter().enumerate().map(|(i, x)| 0.5 + beta * x + effects[i % groups] + 0.1 * normal(rng)).collect();
    let x = DMatrix::from_fn(n, 2, |r, c| if c == 0 { 1.0 } else { xs[r] });
    let g = (0..n).map(|i| (i % groups).to_string()).collect();
    Dataset::new(y, x, g, vec!["(Intercept)".into(), "metric".into()]).unwrap()
}

#[test]
fn wald_interval_coverage() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let z = 1.959963984540054;
    let covered = (0..100)
        .filter(|_| {
            let fit = fit_random_intercept_lmm(&simulate(&mut rng, 0.09, 4, 120), &LmmOptions::default()).unwrap();
            let (lo, hi) = fit.wald_ci(1, z);
            lo <= 0.09 && 0.09 <= hi
        })
        .count();
    assert!(covered >= 90, "{covered}/100");
}

#[test]
fn optimizer_beats_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..10 {
        let data = simulate(&mut rng, 0.3, 5, 60);
        let fit = fit_random_intercept_lmm(&data, &LmmOptions::default()).unwrap();
        for k in 0..=480 {
            let theta = (-12.0 + k as f64 * 0.05f64).exp();
            let v = profiled_reml(&data, theta).unwrap();
            assert!(v <= fit.log_restricted_lik + 1e-7, "theta {theta}: {v} > {}", fit.log_restricted_lik);
        }
        assert!(fit.r2m <= fit.r2c && fit.r2c <= 1.0 && fit.r2m >= 0.0);
    }
}

proptest! {
    #[test]
    fn tests_are_antisymmetric(a in prop::collection::vec(-10.0f64..10.0, 3..12), shift in 0.1f64..3.0) {
        let b: Vec<f64> = a.iter().enumerate().map(|(i, v)| v * 0.7 + shift + (i as f64).sin()).collect();
        if let (Ok(x), Ok(y)) = (paired_ttest(&a, &b), paired_ttest(&b, &a)) {
            prop_assert!((x.statistic + y.statistic).abs() < 1e-9);
            prop_assert!((x.p_value - y.p_value).abs() < 1e-12);
        }
        if let (Ok(x), Ok(y)) = (welch_ttest(&a, &b), welch_ttest(&b, &a)) {
            prop_assert!((x.statistic + y.statistic).abs() < 1e-9);
            prop_assert!((x.df - y.df).abs() < 1e-9);
        }
        if let (Ok(x), Ok(y)) = (pearson_test(&a, &b), pearson_test(&b, &a)) {
            prop_assert!((x.statistic - y.statistic).abs() < 1e-12);
        }
    }

    #[test]
    fn p_values_in_unit_interval(a in prop::collection::vec(-5.0f64..5.0, 2..10), b in prop::collection::vec(-5.0f64..5.0, 2..10)) {
        if let Ok(r) = welch_ttest(&a, &b) {
            prop_assert!((0.0..=1.0).contains(&r.p_value));
            prop_assert!(r.df > 0.0);
        }
    }

    #[test]
    fn scaling_differences_raises_t(d in prop::collection::vec(0.1f64..2.0, 3..10), c in 1.1f64..5.0) {
        // a − b = m + c·e with fixed sd path: scaling the mean shift raises |t|
        let e: Vec<f64> = d.iter().enumerate().map(|(i, v)| if i % 2 == 0 { *v } else { -*v }).collect();
        let b = vec![0.0; e.len()];
        let a1: Vec<f64> = e.iter().map(|x| 1.0 + x).collect();
        let a2: Vec<f64> = e.iter().map(|x| c + x).collect();
        if let (Ok(t1), Ok(t2)) = (paired_ttest(&a1, &b), paired_ttest(&a2, &b)) {
            prop_assert!(t2.statistic.abs() > t1.statistic.abs());
            prop_assert!(t2.p_value <= t1.p_value);
        }
    }
}
