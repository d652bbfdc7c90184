use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::dist::normal_two_sided;
use super::{check_finite, sample_var, CancelToken, StatsError};

/// Response, fixed-effects design (intercept included) and grouping factor.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub y: Vec<f64>,
    pub x: DMatrix<f64>,
    pub groups: Vec<String>,
    pub names: Vec<String>,
}

impl Dataset {
    pub fn new(y: Vec<f64>, x: DMatrix<f64>, groups: Vec<String>, names: Vec<String>) -> Result<Self, StatsError> {
        if x.nrows() != y.len() {
            return Err(StatsError::LengthMismatch(x.nrows(), y.len()));
        }
        if groups.len() != y.len() {
            return Err(StatsError::LengthMismatch(groups.len(), y.len()));
        }
        if names.len() != x.ncols() {
            return Err(StatsError::LengthMismatch(names.len(), x.ncols()));
        }
        check_finite(&y)?;
        check_finite(x.as_slice())?;
        Ok(Dataset { y, x, groups, names })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }
}

#[derive(Debug, Clone)]
pub struct LmmOptions {
    /// Search interval for log θ, θ = σ²_b / σ²_e.
    pub log_theta_range: (f64, f64),
    pub tolerance: f64,
    pub max_iter: usize,
    pub cancel: Option<CancelToken>,
}

impl Default for LmmOptions {
    fn default() -> Self {
        LmmOptions { log_theta_range: (-12.0, 12.0), tolerance: 1e-9, max_iter: 200, cancel: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LmmFit {
    pub names: Vec<String>,
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
    pub sigma_b2: f64,
    pub sigma_e2: f64,
    pub theta: f64,
    pub r2m: f64,
    pub r2c: f64,
    pub log_restricted_lik: f64,
    pub wald_z: Vec<f64>,
    pub p_values: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub n_obs: usize,
    pub n_groups: usize,
}

impl LmmFit {
    pub fn coef(&self, name: &str) -> Option<(f64, f64, f64)> {
        let i = self.names.iter().position(|n| n == name)?;
        Some((self.beta[i], self.se[i], self.p_values[i]))
    }

    /// Wald interval at the given two-sided normal quantile.
    pub fn wald_ci(&self, i: usize, z: f64) -> (f64, f64) {
        (self.beta[i] - z * self.se[i], self.beta[i] + z * self.se[i])
    }
}

/// Per-group sufficient statistics; the likelihood for any θ needs only these.
struct GroupStats {
    n: f64,
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
    xt1: DVector<f64>,
    sum_y: f64,
}

struct Profile {
    stats: Vec<GroupStats>,
    yty: f64,
    n: usize,
    p: usize,
}

struct Eval {
    loglik: f64,
    beta: DVector<f64>,
    a_inv: DMatrix<f64>,
    sigma_e2: f64,
}

impl Profile {
    fn new(data: &Dataset) -> (Self, usize) {
        let mut idx: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, g) in data.groups.iter().enumerate() {
            idx.entry(g.as_str()).or_default().push(i);
        }
        let p = data.x.ncols();
        let stats = idx
            .values()
            .map(|rows| {
                let xg = data.x.select_rows(rows.iter());
                let yg = DVector::from_iterator(rows.len(), rows.iter().map(|&r| data.y[r]));
                GroupStats {
                    n: rows.len() as f64,
                    xtx: xg.transpose() * &xg,
                    xty: xg.transpose() * &yg,
                    xt1: xg.row_sum().transpose(),
                    sum_y: yg.sum(),
                }
            })
            .collect::<Vec<_>>();
        debug_assert!(stats.iter().all(|s| s.xtx.ncols() == p));
        let yty = data.y.iter().map(|v| v * v).sum();
        let groups = stats.len();
        (Profile { stats, yty, n: data.n(), p }, groups)
    }

    /// Profiled restricted log-likelihood at θ, with σ²_e and β concentrated out.
    fn eval(&self, theta: f64) -> Option<Eval> {
        let p = self.p;
        let mut a = DMatrix::<f64>::zeros(p, p);
        let mut b = DVector::<f64>::zeros(p);
        let mut yvy = self.yty;
        let mut logdet_v = 0.0;
        for g in &self.stats {
            let c = theta / (1.0 + g.n * theta);
            a += &g.xtx - (&g.xt1 * g.xt1.transpose()) * c;
            b += &g.xty - &g.xt1 * (c * g.sum_y);
            yvy -= c * g.sum_y * g.sum_y;
            logdet_v += (g.n * theta).ln_1p();
        }
        let chol = a.clone().cholesky()?;
        let beta = chol.solve(&b);
        let rss = (yvy - b.dot(&beta)).max(0.0);
        let dof = (self.n - p) as f64;
        let sigma_e2 = rss / dof;
        let logdet_a: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let loglik = -0.5
            * (dof * (sigma_e2.ln() + 1.0 + (2.0 * std::f64::consts::PI).ln()) + logdet_v + logdet_a);
        Some(Eval { loglik, beta, a_inv: chol.inverse(), sigma_e2 })
    }

    /// Derivative of the profiled restricted log-likelihood with respect to log θ.
    fn score(&self, theta: f64) -> Option<f64> {
        let ev = self.eval(theta)?;
        let rss = ev.sigma_e2 * (self.n - self.p) as f64;
        if rss <= 0.0 {
            return None;
        }
        let (mut d_logdet_v, mut d_logdet_a, mut d_rss) = (0.0, 0.0, 0.0);
        for g in &self.stats {
            let w = 1.0 / (1.0 + g.n * theta);
            d_logdet_v += g.n * w;
            d_logdet_a -= w * w * (g.xt1.transpose() * &ev.a_inv * &g.xt1)[(0, 0)];
            let resid_sum = g.sum_y - g.xt1.dot(&ev.beta);
            d_rss -= (w * resid_sum).powi(2);
        }
        let dof = (self.n - self.p) as f64;
        Some(-0.5 * theta * (dof * d_rss / rss + d_logdet_v + d_logdet_a))
    }
}

/// Profiled restricted log-likelihood of `data` at a given variance ratio.
pub fn profiled_reml(data: &Dataset, theta: f64) -> Option<f64> {
    Profile::new(data).0.eval(theta).map(|e| e.loglik)
}

fn rank(x: &DMatrix<f64>) -> usize {
    let sv = x.clone().svd(false, false).singular_values;
    let max = sv.max();
    let tol = max * (x.nrows().max(x.ncols()) as f64) * f64::EPSILON;
    sv.iter().filter(|&&s| s > tol).count()
}

/// Ordinary least squares: coefficients, standard errors and residual variance.
pub fn ols(x: &DMatrix<f64>, y: &[f64]) -> Result<(Vec<f64>, Vec<f64>, f64), StatsError> {
    let (n, p) = x.shape();
    if n <= p {
        return Err(StatsError::TooFew { needed: p + 1, got: n });
    }
    let yv = DVector::from_column_slice(y);
    let chol = (x.transpose() * x).cholesky().ok_or(StatsError::RankDeficient { rank: rank(x), cols: p })?;
    let beta = chol.solve(&(x.transpose() * &yv));
    let resid = yv - x * &beta;
    let s2 = resid.norm_squared() / (n - p) as f64;
    let inv = chol.inverse();
    let se = (0..p).map(|i| (s2 * inv[(i, i)]).sqrt()).collect();
    Ok((beta.iter().copied().collect(), se, s2))
}

/// Fits y = Xβ + b_group + ε by REML with a single random intercept.
pub fn fit_random_intercept_lmm(data: &Dataset, opts: &LmmOptions) -> Result<LmmFit, StatsError> {
    let (n, p) = data.x.shape();
    if n <= p {
        return Err(StatsError::TooFew { needed: p + 1, got: n });
    }
    let r = rank(&data.x);
    if r < p {
        return Err(StatsError::RankDeficient { rank: r, cols: p });
    }
    let (profile, n_groups) = Profile::new(data);
    if n_groups < 2 || n_groups >= n {
        return Err(StatsError::TooFewGroups);
    }
    let cancelled = || opts.cancel.as_ref().is_some_and(|c| c.is_cancelled());
    let f = |phi: f64| profile.eval(phi.exp()).map_or(f64::NEG_INFINITY, |e| e.loglik);

    // coarse grid, then golden-section refinement around the best point
    let (lo, hi) = opts.log_theta_range;
    let step = 0.25;
    let steps = ((hi - lo) / step).round() as usize;
    let mut best = (lo, f(lo));
    for k in 1..=steps {
        if cancelled() {
            return Err(StatsError::Cancelled);
        }
        let phi = lo + k as f64 * step;
        let v = f(phi);
        if v > best.1 {
            best = (phi, v);
        }
    }
    let mut a = (best.0 - step).max(lo);
    let mut b = (best.0 + step).min(hi);
    let mut iterations = 0;
    // bisection on the score when it brackets an interior maximum
    let score = |phi: f64| profile.score(phi.exp());
    if let (Some(sa), Some(sb)) = (score(a), score(b)) {
        if sa > 0.0 && sb < 0.0 {
            while b - a > opts.tolerance && iterations < opts.max_iter {
                if cancelled() {
                    return Err(StatsError::Cancelled);
                }
                iterations += 1;
                let mid = 0.5 * (a + b);
                match score(mid) {
                    Some(s) if s > 0.0 => a = mid,
                    Some(s) if s < 0.0 => b = mid,
                    Some(_) => {
                        a = mid;
                        b = mid;
                    }
                    None => break,
                }
            }
        }
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > opts.tolerance {
        if iterations >= opts.max_iter {
            return Err(StatsError::NotConverged(opts.max_iter));
        }
        if cancelled() {
            return Err(StatsError::Cancelled);
        }
        iterations += 1;
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let phi = 0.5 * (a + b);
    let mut theta = phi.exp();
    let at_boundary = phi - lo <= 2.0 * opts.tolerance.max(1e-12);
    let ev_theta = profile.eval(theta);
    let ev_zero = profile.eval(0.0).ok_or(StatsError::RankDeficient { rank: r, cols: p })?;
    let ev = match ev_theta {
        Some(e) if !at_boundary && e.loglik > ev_zero.loglik => e,
        _ => {
            theta = 0.0;
            ev_zero
        }
    };

    let sigma_e2 = ev.sigma_e2;
    let sigma_b2 = theta * sigma_e2;
    let se: Vec<f64> = (0..p).map(|i| (sigma_e2 * ev.a_inv[(i, i)]).sqrt()).collect();
    let beta: Vec<f64> = ev.beta.iter().copied().collect();
    let wald_z: Vec<f64> = beta.iter().zip(&se).map(|(b, s)| b / s).collect();
    let p_values = wald_z.iter().map(|z| normal_two_sided(*z)).collect();
    let fitted = &data.x * &ev.beta;
    let var_f = if p > 1 { sample_var(fitted.as_slice()) } else { 0.0 };
    let total = var_f + sigma_b2 + sigma_e2;
    let (r2m, r2c) = if total > 0.0 { (var_f / total, (var_f + sigma_b2) / total) } else { (0.0, 0.0) };
    Ok(LmmFit {
        names: data.names.clone(),
        beta,
        se,
        sigma_b2,
        sigma_e2,
        theta,
        r2m,
        r2c,
        log_restricted_lik: ev.loglik,
        wald_z,
        p_values,
        converged: true,
        iterations,
        n_obs: n,
        n_groups,
    })
}
