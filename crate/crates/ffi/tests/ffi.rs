use std::ffi::{c_char, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use approx::assert_relative_eq;
use refgame_ffi::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

fn cs(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { rg_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

#[test]
fn distances() {
    let mut d = 0usize;
    assert_eq!(unsafe { rg_levenshtein(cs("kitten").as_ptr(), cs("sitting").as_ptr(), &mut d) }, RgStatus::Ok);
    assert_eq!(d, 3);
    let mut nd = 0.0;
    assert_eq!(unsafe { rg_normalized_edit_distance(cs("").as_ptr(), cs("").as_ptr(), &mut nd) }, RgStatus::Ok);
    assert_eq!(nd, 0.0);
    assert_eq!(unsafe { rg_normalized_edit_distance(cs("ab").as_ptr(), cs("ba").as_ptr(), &mut nd) }, RgStatus::Ok);
    assert_eq!(nd, 1.0);
    assert_eq!(unsafe { rg_levenshtein(ptr::null(), cs("x").as_ptr(), &mut d) }, RgStatus::NullPointer);
    assert!(last_error().contains("null"));
    let bad = [0xffu8 as c_char, 0];
    assert_eq!(unsafe { rg_levenshtein(bad.as_ptr(), cs("x").as_ptr(), &mut d) }, RgStatus::InvalidUtf8);
}

#[test]
fn corpus_metrics_match_the_library() {
    let c = rg_corpus_new();
    let words = ["wa", "wa", "ki"];
    let meanings = [(1u8, 0u8, 1u8), (2, 1, 2), (3, 2, 3)];
    for ((s, col, a), w) in meanings.iter().zip(words) {
        assert_eq!(unsafe { rg_corpus_push(c, *s, *col, *a, cs(w).as_ptr()) }, RgStatus::Ok);
    }
    assert_eq!(unsafe { rg_corpus_len(c) }, 3);
    let mut m = RgMetric { value: 0.0, has_value: false, defined: false };
    assert_eq!(unsafe { rg_corpus_metric(c, ptr::null(), cs("ratioUniLabels").as_ptr(), &mut m) }, RgStatus::Ok);
    assert!(m.has_value && m.defined);
    assert_relative_eq!(m.value, 2.0 / 3.0, epsilon = 1e-12);
    assert_eq!(unsafe { rg_corpus_metric(c, ptr::null(), cs("meanWordLength").as_ptr(), &mut m) }, RgStatus::Ok);
    assert_relative_eq!(m.value, 2.0, epsilon = 1e-12);
    assert_eq!(unsafe { rg_corpus_metric(c, ptr::null(), cs("percCom").as_ptr(), &mut m) }, RgStatus::InvalidArgument);
    assert_eq!(unsafe { rg_corpus_push(c, 4, 0, 1, cs("wa").as_ptr()) }, RgStatus::OutOfRange);
    assert_eq!(unsafe { rg_corpus_push(c, 1, 0, 1, cs("Wa!").as_ptr()) }, RgStatus::InvalidArgument);
    assert_eq!(unsafe { rg_corpus_len(c) }, 3);
    unsafe { rg_corpus_free(c) };
    unsafe { rg_corpus_free(ptr::null_mut()) };
}

#[test]
fn welch_test_matches_independent_formula() {
    let a = [1.2, 2.3, 2.9, 4.1, 5.0];
    let b = [2.0, 2.2, 2.8, 3.1, 7.5, 8.0];
    let mut r = RgTestResult { statistic: 0.0, df: 0.0, p_value: 0.0, effect_size: 0.0 };
    assert_eq!(unsafe { rg_welch_ttest(a.as_ptr(), a.len(), b.as_ptr(), b.len(), &mut r) }, RgStatus::Ok);
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let var = |x: &[f64]| {
        let m = mean(x);
        x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
    };
    let (va, vb) = (var(&a) / 5.0, var(&b) / 6.0);
    let t = (mean(&a) - mean(&b)) / (va + vb).sqrt();
    let df = (va + vb).powi(2) / (va * va / 4.0 + vb * vb / 5.0);
    let p = 2.0 * StudentsT::new(0.0, 1.0, df).unwrap().cdf(-t.abs());
    assert_relative_eq!(r.statistic, t, epsilon = 1e-12);
    assert_relative_eq!(r.df, df, epsilon = 1e-10);
    assert_relative_eq!(r.p_value, p, epsilon = 1e-10);
    assert_eq!(unsafe { rg_paired_ttest(a.as_ptr(), 5, b.as_ptr(), 6, &mut r) }, RgStatus::NotComputable);
    assert_eq!(unsafe { rg_pearson_test(ptr::null(), 3, b.as_ptr(), 3, &mut r) }, RgStatus::NullPointer);
}

#[test]
fn lmm_with_no_group_variance_matches_ols() {
    // group effects are exactly zero-mean within the design, so the REML
    // optimum sits at the boundary and the fixed effects equal OLS
    let n = 12;
    let x: Vec<f64> = (0..n).flat_map(|i| [1.0, i as f64]).collect();
    let noise = [0.3, -0.2, -0.1, -0.3, 0.2, 0.1, 0.3, -0.2, -0.1, -0.3, 0.2, 0.1];
    let y: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * i as f64 + noise[i]).collect();
    let g: Vec<u32> = (0..n as u32).map(|i| i / 3 % 4).collect();
    let mut fit = ptr::null_mut();
    assert_eq!(unsafe { rg_lmm_fit(y.as_ptr(), x.as_ptr(), n, 2, g.as_ptr(), &mut fit) }, RgStatus::Ok);
    let mut s = std::mem::MaybeUninit::<RgLmmSummary>::uninit();
    assert_eq!(unsafe { rg_lmm_summary(fit, s.as_mut_ptr()) }, RgStatus::Ok);
    let s = unsafe { s.assume_init() };
    assert_eq!(s.n_coef, 2);
    // closed-form OLS slope and intercept
    let xm = (n as f64 - 1.0) / 2.0;
    let ym = y.iter().sum::<f64>() / n as f64;
    let sxy: f64 = (0..n).map(|i| (i as f64 - xm) * (y[i] - ym)).sum();
    let sxx: f64 = (0..n).map(|i| (i as f64 - xm).powi(2)).sum();
    let slope = sxy / sxx;
    let (mut b0, mut b1) = (0.0, 0.0);
    assert_eq!(unsafe { rg_lmm_coef(fit, 0, &mut b0, ptr::null_mut(), ptr::null_mut()) }, RgStatus::Ok);
    assert_eq!(unsafe { rg_lmm_coef(fit, 1, &mut b1, ptr::null_mut(), ptr::null_mut()) }, RgStatus::Ok);
    assert!(s.sigma_b2 < 1e-8, "sigma_b2 = {}", s.sigma_b2);
    assert_relative_eq!(b1, slope, epsilon = 1e-6);
    assert_relative_eq!(b0, ym - slope * xm, epsilon = 1e-6);
    assert_eq!(unsafe { rg_lmm_coef(fit, 5, &mut b0, ptr::null_mut(), ptr::null_mut()) }, RgStatus::OutOfRange);
    unsafe { rg_lmm_free(fit) };

    let mut none = ptr::null_mut();
    let one_group = vec![0u32; n];
    assert_eq!(
        unsafe { rg_lmm_fit(y.as_ptr(), x.as_ptr(), n, 2, one_group.as_ptr(), &mut none) },
        RgStatus::NotComputable
    );
    assert!(none.is_null());
    assert!(!last_error().is_empty());
}

fn target_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(|deps| deps.parent()).unwrap().to_path_buf()
}

#[test]
fn header_is_current_and_c_program_links() {
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(crate_dir.join("include/refgame.h")).unwrap();
    for f in ["rg_levenshtein", "rg_corpus_new", "rg_corpus_metric", "rg_welch_ttest", "rg_lmm_fit", "rg_last_error_message"] {
        assert!(header.contains(f), "{f} missing from header");
    }
    let lib_dir = target_dir();
    assert!(lib_dir.join("librefgame_ffi.so").exists() || lib_dir.join("librefgame_ffi.dylib").exists());
    let tmp = tempfile_dir();
    let exe = tmp.join("smoke");
    let status = Command::new("cc")
        .arg(crate_dir.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg("-L")
        .arg(&lib_dir)
        .args(["-lrefgame_ffi", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("a C compiler is available");
    assert!(status.success());
    let out = Command::new(&exe).env("LD_LIBRARY_PATH", &lib_dir).env("DYLD_LIBRARY_PATH", &lib_dir).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}

fn tempfile_dir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("refgame-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
