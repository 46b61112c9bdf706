//! C ABI over `relscore`.
//!
//! Every fallible function returns an [`RsStatus`] and writes its result
//! through an out-pointer. On failure the message is kept per thread and can
//! be copied out with [`rs_last_error_message`]. Panics never cross the
//! boundary; they surface as `RS_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use relscore::edgeworth::{ee_cdf, ee_pdf, shortest_interval, EdgeworthParams, ExpansionKind, QuantileMethod};
use relscore::estimator::{moment_summary, relative_score, ScoreSample};
use relscore::inference::{ci_clt, ci_edgeworth, ConfidenceInterval, Verdict};
use relscore::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RsStatus {
    Ok = 0,
    NullPointer = 1,
    EmptySample = 2,
    NonFiniteInput = 3,
    SampleTooSmall = 4,
    ZeroVariance = 5,
    InvalidAlpha = 6,
    InvalidParameter = 7,
    Panic = 255,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RsVerdict {
    Model1Better = 0,
    Model2Better = 1,
    Inconclusive = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RsKind {
    Z = 0,
    T = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RsQuantileMethod {
    /// Not an Edgeworth interval.
    None = 0,
    ShortestInterval = 1,
    EqualTailed = 2,
    NormalFallback = 3,
}

/// Opaque paired sample of log-densities.
pub struct RsScoreSample {
    inner: ScoreSample,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RsMomentSummary {
    pub n: usize,
    pub mean: f64,
    /// Denominator `n - 1`.
    pub variance: f64,
    pub skewness: f64,
    pub kurtosis_excess: f64,
    /// All differences equal; the higher moments are reported as 0.
    pub degenerate: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RsInterval {
    pub lower: f64,
    pub upper: f64,
    pub point: f64,
    pub std_error: f64,
    pub verdict: RsVerdict,
    pub quantile_method: RsQuantileMethod,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RsQuantilePair {
    pub lo: f64,
    pub hi: f64,
    pub mass: f64,
    pub method: RsQuantileMethod,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> RsStatus {
    match e {
        Error::EmptySample => RsStatus::EmptySample,
        Error::NonFiniteInput { .. } => RsStatus::NonFiniteInput,
        Error::SampleTooSmall { .. } => RsStatus::SampleTooSmall,
        Error::ZeroVariance => RsStatus::ZeroVariance,
        Error::InvalidAlpha(_) => RsStatus::InvalidAlpha,
        _ => RsStatus::InvalidParameter,
    }
}

fn guard<F: FnOnce() -> Result<(), RsStatus>>(f: F) -> RsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            RsStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            RsStatus::Panic
        }
    }
}

fn fail(e: Error) -> RsStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn null(what: &str) -> RsStatus {
    set_error(format!("null pointer: {what}"));
    RsStatus::NullPointer
}

fn kind_of(k: RsKind) -> ExpansionKind {
    match k {
        RsKind::Z => ExpansionKind::Z,
        RsKind::T => ExpansionKind::T,
    }
}

fn method_of(m: Option<QuantileMethod>) -> RsQuantileMethod {
    match m {
        None => RsQuantileMethod::None,
        Some(QuantileMethod::ShortestInterval) => RsQuantileMethod::ShortestInterval,
        Some(QuantileMethod::EqualTailed) => RsQuantileMethod::EqualTailed,
        Some(QuantileMethod::NormalFallback) => RsQuantileMethod::NormalFallback,
    }
}

fn interval_of(ci: &ConfidenceInterval) -> RsInterval {
    RsInterval {
        lower: ci.lower,
        upper: ci.upper,
        point: ci.point,
        std_error: ci.stderr,
        verdict: match ci.verdict {
            Verdict::Model1Better => RsVerdict::Model1Better,
            Verdict::Model2Better => RsVerdict::Model2Better,
            Verdict::Inconclusive => RsVerdict::Inconclusive,
        },
        quantile_method: method_of(ci.quantiles),
    }
}

/// # Safety
/// `ptr` must be null or valid for `n` reads.
unsafe fn slice<'a>(ptr: *const f64, n: usize) -> Option<&'a [f64]> {
    if n == 0 {
        Some(&[])
    } else if ptr.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(ptr, n))
    }
}

/// Copies `n` paired log-densities into a new sample.
///
/// # Safety
/// `ell1` and `ell2` must be valid for `n` reads and `out` for one write.
/// Free the result with [`rs_score_sample_free`].
#[no_mangle]
pub unsafe extern "C" fn rs_score_sample_new(
    ell1: *const f64,
    ell2: *const f64,
    n: usize,
    out: *mut *mut RsScoreSample,
) -> RsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let (Some(a), Some(b)) = (slice(ell1, n), slice(ell2, n)) else {
            return Err(null("ell1/ell2"));
        };
        let inner = ScoreSample::from_log_densities(a.to_vec(), b.to_vec()).map_err(fail)?;
        *out = Box::into_raw(Box::new(RsScoreSample { inner }));
        Ok(())
    })
}

/// # Safety
/// `sample` must be null or come from [`rs_score_sample_new`] and not have
/// been freed.
#[no_mangle]
pub unsafe extern "C" fn rs_score_sample_free(sample: *mut RsScoreSample) {
    if !sample.is_null() {
        drop(Box::from_raw(sample));
    }
}

/// Number of pairs, or 0 for a null handle.
///
/// # Safety
/// `sample` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rs_score_sample_len(sample: *const RsScoreSample) -> usize {
    sample.as_ref().map_or(0, |s| s.inner.len())
}

/// # Safety
/// `sample` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn rs_relative_score(sample: *const RsScoreSample, out: *mut f64) -> RsStatus {
    guard(|| {
        let s = sample.as_ref().ok_or_else(|| null("sample"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = relative_score(&s.inner).map_err(fail)?;
        Ok(())
    })
}

/// # Safety
/// `sample` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn rs_moment_summary(sample: *const RsScoreSample, out: *mut RsMomentSummary) -> RsStatus {
    guard(|| {
        let s = sample.as_ref().ok_or_else(|| null("sample"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let m = moment_summary(&s.inner).map_err(fail)?;
        *out = RsMomentSummary {
            n: m.n,
            mean: m.mean,
            variance: m.variance,
            skewness: m.skewness,
            kurtosis_excess: m.kurtosis_excess,
            degenerate: m.degenerate,
        };
        Ok(())
    })
}

/// CLT interval at level `1 - alpha`.
///
/// # Safety
/// `sample` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn rs_ci_clt(sample: *const RsScoreSample, alpha: f64, out: *mut RsInterval) -> RsStatus {
    guard(|| {
        let s = sample.as_ref().ok_or_else(|| null("sample"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = interval_of(&ci_clt(&s.inner, alpha).map_err(fail)?);
        Ok(())
    })
}

/// Edgeworth interval. Pass NaN as `known_variance` to use the sample
/// variance; it is only used by kind Z.
///
/// # Safety
/// `sample` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn rs_ci_edgeworth(
    sample: *const RsScoreSample,
    alpha: f64,
    kind: RsKind,
    known_variance: f64,
    out: *mut RsInterval,
) -> RsStatus {
    guard(|| {
        let s = sample.as_ref().ok_or_else(|| null("sample"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let known = (!known_variance.is_nan()).then_some(known_variance);
        *out = interval_of(&ci_edgeworth(&s.inner, alpha, kind_of(kind), known).map_err(fail)?);
        Ok(())
    })
}

fn params(n: usize, kappa3: f64, kappa4: f64, kind: RsKind) -> Result<EdgeworthParams, RsStatus> {
    EdgeworthParams::new(n, kappa3, kappa4, kind_of(kind)).map_err(fail)
}

/// Expansion CDF clamped to [0, 1].
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn rs_ee_cdf(
    x: f64,
    n: usize,
    kappa3: f64,
    kappa4: f64,
    kind: RsKind,
    out: *mut f64,
) -> RsStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = ee_cdf(x, &params(n, kappa3, kappa4, kind)?);
        Ok(())
    })
}

/// Expansion density (may be negative).
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn rs_ee_pdf(
    x: f64,
    n: usize,
    kappa3: f64,
    kappa4: f64,
    kind: RsKind,
    out: *mut f64,
) -> RsStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = ee_pdf(x, &params(n, kappa3, kappa4, kind)?);
        Ok(())
    })
}

/// Shortest `1 - alpha` interval of the expansion.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn rs_shortest_interval(
    n: usize,
    kappa3: f64,
    kappa4: f64,
    kind: RsKind,
    alpha: f64,
    out: *mut RsQuantilePair,
) -> RsStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let q = shortest_interval(&params(n, kappa3, kappa4, kind)?, alpha).map_err(fail)?;
        *out = RsQuantilePair { lo: q.lo, hi: q.hi, mass: q.mass, method: method_of(Some(q.method)) };
        Ok(())
    })
}

/// Copies the calling thread's last error message into `buf` as a
/// NUL-terminated string, truncating to `len - 1` bytes. Returns the full
/// message length in bytes excluding the terminator.
///
/// # Safety
/// `buf` must be null or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn rs_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let k = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, k);
            *buf.add(k) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rs_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version contains NUL"),
    };
    VERSION.as_ptr()
}
