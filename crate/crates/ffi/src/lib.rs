//! C ABI over the `hcsp` library.
//!
//! Every function returns an [`HcspStatus`]; on failure a message is kept
//! per thread and read with [`hcsp_last_error`]. Handles are opaque and
//! released with their `_free` function. Strings returned through `out`
//! parameters are owned by the caller and released with [`hcsp_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hcsp::job::{Job, JobError, Report};
use hcsp::lang::Process;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HcspStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Spec = 4,
    Job = 5,
    Io = 6,
    OutOfRange = 7,
    Panic = 8,
}

/// A parsed HCSP process.
pub struct HcspProcess {
    inner: Process,
}

/// The report of a verification job.
pub struct HcspReport {
    inner: Report,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("no interior nul"));
}

fn guard(f: impl FnOnce() -> Result<(), (HcspStatus, String)>) -> HcspStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            HcspStatus::Ok
        }
        Ok(Err((st, msg))) => {
            set_error(msg);
            st
        }
        Err(_) => {
            set_error("internal panic");
            HcspStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, (HcspStatus, String)> {
    if p.is_null() {
        return Err((HcspStatus::NullArgument, "null string argument".into()));
    }
    CStr::from_ptr(p).to_str().map_err(|e| (HcspStatus::InvalidUtf8, e.to_string()))
}

fn to_c(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("no interior nul").into_raw()
}

fn null_arg(what: &str) -> (HcspStatus, String) {
    (HcspStatus::NullArgument, format!("null {what}"))
}

/// The message of the last failed call on this thread; empty after a
/// successful call. Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn hcsp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hcsp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses `text` into a process handle.
///
/// # Safety
/// `text` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hcsp_parse(text: *const c_char, out: *mut *mut HcspProcess) -> HcspStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_arg("output pointer"));
        }
        *out = ptr::null_mut();
        let text = read_str(text)?;
        let inner = hcsp::lang::parse(text).map_err(|e| (HcspStatus::Parse, e.to_string()))?;
        *out = Box::into_raw(Box::new(HcspProcess { inner }));
        Ok(())
    })
}

/// The process in concrete syntax.
///
/// # Safety
/// `p` must be a live process handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hcsp_process_pretty(p: *const HcspProcess, out: *mut *mut c_char) -> HcspStatus {
    guard(|| {
        let (Some(p), false) = (p.as_ref(), out.is_null()) else { return Err(null_arg("argument")) };
        *out = to_c(p.inner.pretty());
        Ok(())
    })
}

/// The generated specification of a sequential process, pretty-printed.
///
/// # Safety
/// `p` must be a live process handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hcsp_process_spec(p: *const HcspProcess, out: *mut *mut c_char) -> HcspStatus {
    guard(|| {
        let (Some(p), false) = (p.as_ref(), out.is_null()) else { return Err(null_arg("argument")) };
        let spec = hcsp::specgen::generate(&p.inner).map_err(|e| (HcspStatus::Spec, e.to_string()))?;
        *out = to_c(spec.assertion.pretty());
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a process handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hcsp_process_free(p: *mut HcspProcess) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Runs the verification job given as JSON text.
///
/// # Safety
/// `job_json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hcsp_job_run(job_json: *const c_char, out: *mut *mut HcspReport) -> HcspStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_arg("output pointer"));
        }
        *out = ptr::null_mut();
        let text = read_str(job_json)?;
        let job_err = |e: JobError| {
            let st = match e {
                JobError::Parse { .. } | JobError::Cond { .. } => HcspStatus::Parse,
                JobError::Spec { .. } => HcspStatus::Spec,
                _ => HcspStatus::Job,
            };
            (st, e.to_string())
        };
        let job = Job::from_json(text).map_err(job_err)?;
        let inner = hcsp::job::run(&job).map_err(job_err)?;
        *out = Box::into_raw(Box::new(HcspReport { inner }));
        Ok(())
    })
}

/// The report as text.
///
/// # Safety
/// `r` must be a live report handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hcsp_report_text(r: *const HcspReport, out: *mut *mut c_char) -> HcspStatus {
    guard(|| {
        let (Some(r), false) = (r.as_ref(), out.is_null()) else { return Err(null_arg("argument")) };
        *out = to_c(r.inner.text());
        Ok(())
    })
}

/// The synchronized assertion, pretty-printed.
///
/// # Safety
/// `r` must be a live report handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hcsp_report_assertion(r: *const HcspReport, out: *mut *mut c_char) -> HcspStatus {
    guard(|| {
        let (Some(r), false) = (r.as_ref(), out.is_null()) else { return Err(null_arg("argument")) };
        *out = to_c(r.inner.assertion.clone());
        Ok(())
    })
}

/// The CLI exit code for the report (0 pass, 2 failed obligation,
/// 3 oracle counterexample), or -1 for a null handle.
///
/// # Safety
/// `r` must be null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn hcsp_report_exit_code(r: *const HcspReport) -> i32 {
    r.as_ref().map_or(-1, |r| r.inner.exit_code())
}

/// Number of synchronized loops in the report, 0 for a null handle.
///
/// # Safety
/// `r` must be null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn hcsp_report_loop_count(r: *const HcspReport) -> usize {
    r.as_ref().map_or(0, |r| r.inner.stats.loops.len())
}

/// Branches generated and kept after pruning for loop `index`.
///
/// # Safety
/// `r` must be a live report handle; `generated` and `kept` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn hcsp_report_loop_stats(
    r: *const HcspReport,
    index: usize,
    generated: *mut usize,
    kept: *mut usize,
) -> HcspStatus {
    guard(|| {
        let Some(r) = r.as_ref() else { return Err(null_arg("report")) };
        if generated.is_null() || kept.is_null() {
            return Err(null_arg("output pointer"));
        }
        let l = r
            .inner
            .stats
            .loops
            .get(index)
            .ok_or_else(|| (HcspStatus::OutOfRange, format!("loop {index} of {}", r.inner.stats.loops.len())))?;
        *generated = l.generated;
        *kept = l.kept;
        Ok(())
    })
}

/// Number of obligations in the report, 0 for a null handle.
///
/// # Safety
/// `r` must be null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn hcsp_report_obligation_count(r: *const HcspReport) -> usize {
    r.as_ref().map_or(0, |r| r.inner.obligations.len())
}

/// Writes the report files into directory `dir`.
///
/// # Safety
/// `r` must be a live report handle and `dir` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn hcsp_report_write(r: *const HcspReport, dir: *const c_char) -> HcspStatus {
    guard(|| {
        let Some(r) = r.as_ref() else { return Err(null_arg("report")) };
        let dir = read_str(dir)?;
        r.inner.write(std::path::Path::new(dir)).map_err(|e| (HcspStatus::Io, e.to_string()))
    })
}

/// # Safety
/// `r` must be null or a report handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hcsp_report_free(r: *mut HcspReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}
