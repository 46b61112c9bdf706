use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use relscore_ffi::*;

fn sample(ell1: &[f64], ell2: &[f64]) -> *mut RsScoreSample {
    let mut h = ptr::null_mut();
    let st = unsafe { rs_score_sample_new(ell1.as_ptr(), ell2.as_ptr(), ell1.len(), &mut h) };
    assert_eq!(st, RsStatus::Ok);
    assert!(!h.is_null());
    h
}

fn last_error() -> String {
    let mut buf = [0 as std::ffi::c_char; 256];
    unsafe {
        rs_last_error_message(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn score_and_summary_through_handle() {
    let h = sample(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]);
    unsafe {
        assert_eq!(rs_score_sample_len(h), 3);
        let mut d = 0.0;
        assert_eq!(rs_relative_score(h, &mut d), RsStatus::Ok);
        assert!((d - 2.0).abs() < 1e-15);
        let mut m = RsMomentSummary::default();
        assert_eq!(rs_moment_summary(h, &mut m), RsStatus::Ok);
        assert_eq!(m.n, 3);
        assert!((m.variance - 1.0).abs() < 1e-15);
        assert!(m.skewness.abs() < 1e-15);
        assert!((m.kurtosis_excess + 1.5).abs() < 1e-12);
        rs_score_sample_free(h);
    }
}

#[test]
fn intervals_and_verdicts() {
    let diffs: Vec<f64> = (0..200).map(|i| 0.5 + ((i * 37 % 101) as f64 / 101.0 - 0.5)).collect();
    let zeros = vec![0.0; diffs.len()];
    let h = sample(&diffs, &zeros);
    let blank = RsInterval {
        lower: 0.0,
        upper: 0.0,
        point: 0.0,
        std_error: 0.0,
        verdict: RsVerdict::Inconclusive,
        quantile_method: RsQuantileMethod::None,
    };
    unsafe {
        let mut clt = blank;
        assert_eq!(rs_ci_clt(h, 0.1, &mut clt), RsStatus::Ok);
        assert!(clt.lower < clt.point && clt.point < clt.upper);
        assert_eq!(clt.verdict, RsVerdict::Model1Better);
        assert_eq!(clt.quantile_method, RsQuantileMethod::None);

        let mut ee = blank;
        assert_eq!(rs_ci_edgeworth(h, 0.1, RsKind::T, f64::NAN, &mut ee), RsStatus::Ok);
        assert_eq!(ee.quantile_method, RsQuantileMethod::ShortestInterval);
        assert_eq!(ee.verdict, RsVerdict::Model1Better);

        let mut ez = blank;
        assert_eq!(rs_ci_edgeworth(h, 0.1, RsKind::Z, 4.0, &mut ez), RsStatus::Ok);
        assert!((ez.std_error - (4.0f64 / 200.0).sqrt()).abs() < 1e-15);

        assert_eq!(rs_ci_clt(h, 1.5, &mut clt), RsStatus::InvalidAlpha);
        assert!(last_error().contains("alpha"));
        rs_score_sample_free(h);
    }
}

#[test]
fn error_codes() {
    unsafe {
        let mut h = ptr::null_mut();
        let bad = [1.0, f64::NAN];
        assert_eq!(rs_score_sample_new(bad.as_ptr(), bad.as_ptr(), 2, &mut h), RsStatus::NonFiniteInput);
        assert!(h.is_null());
        assert_eq!(rs_score_sample_new(ptr::null(), bad.as_ptr(), 2, &mut h), RsStatus::NullPointer);

        let same = sample(&[1.0; 10], &[0.0; 10]);
        let mut out = RsInterval {
            lower: 0.0,
            upper: 0.0,
            point: 0.0,
            std_error: 0.0,
            verdict: RsVerdict::Inconclusive,
            quantile_method: RsQuantileMethod::None,
        };
        assert_eq!(rs_ci_clt(same, 0.1, &mut out), RsStatus::ZeroVariance);
        assert!(last_error().starts_with("zero variance"));
        assert_eq!(rs_ci_clt(same, 0.1, ptr::null_mut()), RsStatus::NullPointer);
        rs_score_sample_free(same);

        let empty = sample(&[], &[]);
        let mut d = 0.0;
        assert_eq!(rs_relative_score(empty, &mut d), RsStatus::EmptySample);
        rs_score_sample_free(empty);
        rs_score_sample_free(ptr::null_mut());
        assert_eq!(rs_score_sample_len(ptr::null()), 0);
    }
}

#[test]
fn expansion_entry_points() {
    unsafe {
        let (mut c, mut p) = (0.0, 0.0);
        assert_eq!(rs_ee_cdf(0.0, 100, 1.0, 0.0, RsKind::Z, &mut c), RsStatus::Ok);
        assert!((c - 0.5066490).abs() < 1e-7);
        assert_eq!(rs_ee_pdf(0.0, 100, 1.0, 0.0, RsKind::Z, &mut p), RsStatus::Ok);
        assert!((p - 0.3981112).abs() < 1e-7);
        let mut q = RsQuantilePair { lo: 0.0, hi: 0.0, mass: 0.0, method: RsQuantileMethod::None };
        assert_eq!(rs_shortest_interval(50, 0.0, 0.0, RsKind::Z, 0.05, &mut q), RsStatus::Ok);
        assert!((q.hi - 1.959963984540054).abs() < 1e-6 && (q.lo + q.hi).abs() < 1e-6);
        assert_eq!(rs_ee_cdf(0.0, 0, 0.0, 0.0, RsKind::Z, &mut c), RsStatus::SampleTooSmall);
        assert_eq!(rs_ee_pdf(0.0, 10, f64::NAN, 0.0, RsKind::T, &mut p), RsStatus::InvalidParameter);
    }
}

#[test]
fn error_message_truncates_and_reports_length() {
    unsafe {
        let mut c = 0.0;
        rs_ee_cdf(0.0, 0, 0.0, 0.0, RsKind::Z, &mut c);
        let full = rs_last_error_message(ptr::null_mut(), 0);
        assert!(full > 4);
        let mut buf = [1 as std::ffi::c_char; 4];
        assert_eq!(rs_last_error_message(buf.as_mut_ptr(), 4), full);
        assert_eq!(buf[3], 0);
        let v = CStr::from_ptr(rs_version()).to_str().unwrap();
        assert_eq!(v, env!("CARGO_PKG_VERSION"));
    }
}

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links_from_c() {
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = crate_dir.join("include").join("relscore.h");
    let text = std::fs::read_to_string(&header).expect("header generated by build script");
    for sym in ["rs_score_sample_new", "rs_ci_edgeworth", "rs_shortest_interval", "RS_STATUS_ZERO_VARIANCE"] {
        assert!(text.contains(sym), "{sym} missing from header");
    }
    let lib = target_dir().join("librelscore_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include <math.h>
#include "relscore.h"
int main(void) {
    double a[6] = {0.1, 0.4, -0.2, 0.9, 0.3, 0.5};
    double b[6] = {0, 0, 0, 0, 0, 0};
    RsScoreSample *s = NULL;
    if (rs_score_sample_new(a, b, 6, &s) != RS_STATUS_OK) return 10;
    RsInterval ci;
    if (rs_ci_edgeworth(s, 0.1, RS_KIND_T, NAN, &ci) != RS_STATUS_OK) return 11;
    double d;
    rs_relative_score(s, &d);
    rs_score_sample_free(s);
    RsInterval bad;
    RsStatus st = rs_ci_clt(NULL, 0.1, &bad);
    char msg[64];
    rs_last_error_message(msg, sizeof msg);
    printf("%.6f %d %d %s\n", d, ci.lower < d && d < ci.upper, (int)st, msg);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("main");
    let cc = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .output()
        .expect("C compiler available");
    assert!(cc.status.success(), "{}", String::from_utf8_lossy(&cc.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success());
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "0.333333 1 1 null pointer: sample");
}
