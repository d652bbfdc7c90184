//! C ABI for edit distances, corpus metrics, hypothesis tests and the
//! random-intercept mixed model.
//!
//! Every fallible function returns an [`RgStatus`]; on failure a message is
//! available from [`rg_last_error_message`] on the same thread. Handles are
//! opaque and must be released with their `_free` function. No function
//! unwinds across the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::DMatrix;
use refgame::language::{levenshtein, normalized_edit_distance, Colour, Label, Meaning};
use refgame::metrics::{Corpus, EntropyConfig, MetricReport};
use refgame::stats::{fit_random_intercept_lmm, paired_ttest, pearson_test, welch_ttest, Dataset, LmmFit, LmmOptions, TestResult};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    /// The statistic cannot be computed on this input.
    NotComputable = 4,
    OutOfRange = 5,
    Internal = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: RgStatus, msg: impl Into<String>) -> RgStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
    status
}

fn guard(f: impl FnOnce() -> Result<(), (RgStatus, String)>) -> RgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RgStatus::Ok,
        Ok(Err((status, msg))) => fail(status, msg),
        Err(_) => fail(RgStatus::Internal, "internal panic"),
    }
}

type Res<T> = Result<T, (RgStatus, String)>;

fn null(what: &str) -> (RgStatus, String) {
    (RgStatus::NullPointer, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Res<&'a str> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (RgStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &str) -> Res<&'a [f64]> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn write<T>(out: *mut T, v: T) -> Res<()> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(v);
    Ok(())
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length excluding the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn rg_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Character-level Levenshtein distance.
///
/// # Safety
/// `a` and `b` must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_levenshtein(a: *const c_char, b: *const c_char, out: *mut usize) -> RgStatus {
    guard(|| write(out, levenshtein(text(a, "a")?, text(b, "b")?)))
}

/// Levenshtein distance divided by the longer length; 0 for two empty strings.
///
/// # Safety
/// As for [`rg_levenshtein`].
#[no_mangle]
pub unsafe extern "C" fn rg_normalized_edit_distance(a: *const c_char, b: *const c_char, out: *mut f64) -> RgStatus {
    guard(|| write(out, normalized_edit_distance(text(a, "a")?, text(b, "b")?)))
}

/// A list of (meaning, label) pairs.
pub struct RgCorpus {
    pairs: Vec<(Meaning, Label)>,
}

/// Creates an empty corpus.
#[no_mangle]
pub extern "C" fn rg_corpus_new() -> *mut RgCorpus {
    Box::into_raw(Box::new(RgCorpus { pairs: Vec::new() }))
}

/// Releases a corpus. Null is ignored.
///
/// # Safety
/// `corpus` must come from [`rg_corpus_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rg_corpus_free(corpus: *mut RgCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Appends a production. `shape` and `amount` are 1..=3; `colour` is
/// 0 orange, 1 blue, 2 green; `label` must be lowercase alphanumeric.
///
/// # Safety
/// `corpus` must be a live handle and `label` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn rg_corpus_push(corpus: *mut RgCorpus, shape: u8, colour: u8, amount: u8, label: *const c_char) -> RgStatus {
    guard(|| {
        let c = corpus.as_mut().ok_or_else(|| null("corpus"))?;
        let colour = *Colour::ALL
            .get(usize::from(colour))
            .ok_or_else(|| (RgStatus::OutOfRange, format!("colour {colour} not in 0..=2")))?;
        let meaning = Meaning::new(shape, colour, amount).map_err(|e| (RgStatus::OutOfRange, e.to_string()))?;
        let label = Label::new(text(label, "label")?).map_err(|e| (RgStatus::InvalidArgument, e.to_string()))?;
        c.pairs.push((meaning, label));
        Ok(())
    })
}

/// Number of pairs in the corpus; 0 for null.
///
/// # Safety
/// `corpus` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rg_corpus_len(corpus: *const RgCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.pairs.len())
}

/// A metric value. `has_value` is false when the metric yields nothing;
/// `defined` is false for conventional values on degenerate input.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RgMetric {
    pub value: f64,
    pub has_value: bool,
    pub defined: bool,
}

/// Computes one metric by name: topsim, synonymy, homonymy, freedom,
/// ngramDiversity, ratioUniLabels, meanWordLength, or genScore (which needs
/// `novel`, a corpus over meanings absent from `corpus`; otherwise it may
/// be null).
///
/// # Safety
/// `corpus` must be a live handle, `novel` null or a live handle, `name` a
/// NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rg_corpus_metric(
    corpus: *const RgCorpus,
    novel: *const RgCorpus,
    name: *const c_char,
    out: *mut RgMetric,
) -> RgStatus {
    guard(|| {
        let c = corpus.as_ref().ok_or_else(|| null("corpus"))?;
        let name = text(name, "name")?;
        let novel = novel.as_ref().map(|n| Corpus::new(n.pairs.clone()));
        let report = MetricReport::compute(&Corpus::new(c.pairs.clone()), novel.as_ref(), None, &EntropyConfig::default());
        let m = report
            .get(name)
            .filter(|_| name != "percCom")
            .ok_or_else(|| (RgStatus::InvalidArgument, format!("unknown metric {name:?}")))?;
        write(out, RgMetric { value: m.value.unwrap_or(f64::NAN), has_value: m.value.is_some(), defined: m.defined })
    })
}

/// Test output; `effect_size` is NaN when the test has none.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RgTestResult {
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
    pub effect_size: f64,
}

unsafe fn run_test(
    a: *const f64,
    na: usize,
    b: *const f64,
    nb: usize,
    out: *mut RgTestResult,
    test: fn(&[f64], &[f64]) -> Result<TestResult, refgame::stats::StatsError>,
) -> RgStatus {
    guard(|| {
        let r = test(slice(a, na, "a")?, slice(b, nb, "b")?).map_err(|e| (RgStatus::NotComputable, e.to_string()))?;
        write(
            out,
            RgTestResult { statistic: r.statistic, df: r.df, p_value: r.p_value, effect_size: r.effect_size.unwrap_or(f64::NAN) },
        )
    })
}

/// Paired t-test of `a` against `b` (equal lengths).
///
/// # Safety
/// `a`/`b` must point to `na`/`nb` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_paired_ttest(a: *const f64, na: usize, b: *const f64, nb: usize, out: *mut RgTestResult) -> RgStatus {
    run_test(a, na, b, nb, out, paired_ttest)
}

/// Welch two-sample t-test.
///
/// # Safety
/// As for [`rg_paired_ttest`].
#[no_mangle]
pub unsafe extern "C" fn rg_welch_ttest(a: *const f64, na: usize, b: *const f64, nb: usize, out: *mut RgTestResult) -> RgStatus {
    run_test(a, na, b, nb, out, welch_ttest)
}

/// Pearson correlation test; `statistic` is r.
///
/// # Safety
/// As for [`rg_paired_ttest`].
#[no_mangle]
pub unsafe extern "C" fn rg_pearson_test(x: *const f64, nx: usize, y: *const f64, ny: usize, out: *mut RgTestResult) -> RgStatus {
    run_test(x, nx, y, ny, out, pearson_test)
}

/// A fitted random-intercept model.
pub struct RgLmmFit {
    fit: LmmFit,
}

/// Fits `y = X b + u[group] + e` by REML. `x` is row-major `n` x `p` and
/// should include an intercept column; `groups` holds one id per row.
///
/// # Safety
/// `y` must hold `n` doubles, `x` `n * p` doubles, `groups` `n` values and
/// `out` must be writable. On success `*out` owns a handle.
#[no_mangle]
pub unsafe extern "C" fn rg_lmm_fit(
    y: *const f64,
    x: *const f64,
    n: usize,
    p: usize,
    groups: *const u32,
    out: *mut *mut RgLmmFit,
) -> RgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("output pointer"));
        }
        out.write(ptr::null_mut());
        if n == 0 || p == 0 {
            return Err((RgStatus::InvalidArgument, "need at least one row and one column".into()));
        }
        let cells = n.checked_mul(p).ok_or_else(|| (RgStatus::InvalidArgument, "n * p overflows".into()))?;
        let y = slice(y, n, "y")?.to_vec();
        let x = DMatrix::from_row_slice(n, p, slice(x, cells, "x")?);
        if groups.is_null() {
            return Err(null("groups"));
        }
        let groups = std::slice::from_raw_parts(groups, n).iter().map(u32::to_string).collect();
        let names = (0..p).map(|j| format!("x{j}")).collect();
        let data = Dataset::new(y, x, groups, names).map_err(|e| (RgStatus::InvalidArgument, e.to_string()))?;
        let fit = fit_random_intercept_lmm(&data, &LmmOptions::default()).map_err(|e| (RgStatus::NotComputable, e.to_string()))?;
        out.write(Box::into_raw(Box::new(RgLmmFit { fit })));
        Ok(())
    })
}

/// Releases a fit. Null is ignored.
///
/// # Safety
/// `fit` must come from [`rg_lmm_fit`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rg_lmm_free(fit: *mut RgLmmFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Fixed effect `i`: estimate, standard error and Wald p-value. Null
/// output pointers are skipped.
///
/// # Safety
/// `fit` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_lmm_coef(fit: *const RgLmmFit, i: usize, beta: *mut f64, se: *mut f64, p_value: *mut f64) -> RgStatus {
    guard(|| {
        let f = &fit.as_ref().ok_or_else(|| null("fit"))?.fit;
        if i >= f.beta.len() {
            return Err((RgStatus::OutOfRange, format!("coefficient {i} of {}", f.beta.len())));
        }
        for (out, v) in [(beta, f.beta[i]), (se, f.se[i]), (p_value, f.p_values[i])] {
            if !out.is_null() {
                out.write(v);
            }
        }
        Ok(())
    })
}

/// Variance components and Nakagawa R-squared values.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RgLmmSummary {
    pub n_coef: usize,
    pub sigma_b2: f64,
    pub sigma_e2: f64,
    pub r2_marginal: f64,
    pub r2_conditional: f64,
    pub log_restricted_lik: f64,
    pub converged: bool,
}

/// # Safety
/// `fit` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rg_lmm_summary(fit: *const RgLmmFit, out: *mut RgLmmSummary) -> RgStatus {
    guard(|| {
        let f = &fit.as_ref().ok_or_else(|| null("fit"))?.fit;
        write(
            out,
            RgLmmSummary {
                n_coef: f.beta.len(),
                sigma_b2: f.sigma_b2,
                sigma_e2: f.sigma_e2,
                r2_marginal: f.r2m,
                r2_conditional: f.r2c,
                log_restricted_lik: f.log_restricted_lik,
                converged: f.converged,
            },
        )
    })
}
