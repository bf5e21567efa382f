//! C interface to the nullgvn pipeline.
//!
//! Programs and reports are opaque handles. Every fallible function returns
//! an [`NgStatus`]; on failure [`ng_last_error`] describes the problem until
//! the next call on the same thread. Strings handed out by the library must
//! be released with [`ng_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nullgvn::corpus::{generate, GeneratorConfig};
use nullgvn::ir::Program;
use nullgvn::parse::print_program;
use nullgvn::pipeline::{analyze, parse_source, transform, Level, Options, PipelineError, SolverKind};
use nullgvn::solver::{SafetyReport, Verdict};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NgStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    /// The program text is malformed or fails validation.
    ParseError = 3,
    /// A pass rejected the program.
    TransformError = 4,
    /// The index is out of range.
    OutOfRange = 5,
    /// A bug inside the library; the message has details.
    Internal = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NgLevel {
    None = 0,
    Ssa = 1,
    Gvn = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NgSolver {
    Worklist = 0,
    Naive = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NgVerdict {
    Safe = 0,
    Unproved = 1,
}

/// A parsed, validated program.
pub struct NgProgram(Program);

/// Verdicts for every assertion of an analysed program.
pub struct NgReport(SafetyReport);

impl From<NgLevel> for Level {
    fn from(l: NgLevel) -> Self {
        match l {
            NgLevel::None => Level::None,
            NgLevel::Ssa => Level::Ssa,
            NgLevel::Gvn => Level::Gvn,
        }
    }
}

impl From<NgSolver> for SolverKind {
    fn from(s: NgSolver) -> Self {
        match s {
            NgSolver::Worklist => SolverKind::Worklist,
            NgSolver::Naive => SolverKind::Naive,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(NgStatus, String);

impl Failure {
    fn null(what: &str) -> Self {
        Failure(NgStatus::NullArgument, format!("{what} is null"))
    }
}

fn pipeline_failure(status: NgStatus, e: PipelineError) -> Failure {
    Failure(status, e.to_string())
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> NgStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NgStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(panic) => {
            let what = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {what}"));
            NgStatus::Internal
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(NgStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::null("output pointer"));
    }
    let c = CString::new(s).map_err(|e| Failure(NgStatus::Internal, e.to_string()))?;
    *out = c.into_raw();
    Ok(())
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next library call on the thread.
#[no_mangle]
pub extern "C" fn ng_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parse program text. With `transformed` set, names in the reserved `__`
/// namespace are accepted so that the output of a transformation can be
/// read back.
///
/// # Safety
/// `source` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ng_program_parse(source: *const c_char, transformed: bool, out: *mut *mut NgProgram) -> NgStatus {
    guard(|| {
        let src = text(source, "source")?;
        let p = parse_source(src, None, transformed).map_err(|e| pipeline_failure(NgStatus::ParseError, e))?;
        put(out, NgProgram(p))
    })
}

/// Generate a random program with the default configuration.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ng_program_generate(seed: u64, out: *mut *mut NgProgram) -> NgStatus {
    guard(|| {
        let p = generate(&GeneratorConfig::default().with_seed(seed))
            .map_err(|e| Failure(NgStatus::Internal, e.to_string()))?;
        put(out, NgProgram(p))
    })
}

/// # Safety
/// `program` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ng_program_free(program: *mut NgProgram) {
    if !program.is_null() {
        drop(Box::from_raw(program));
    }
}

/// Render a program as text. Free the result with [`ng_string_free`].
///
/// # Safety
/// `program` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ng_program_print(program: *const NgProgram, out: *mut *mut c_char) -> NgStatus {
    guard(|| put_string(out, print_program(&handle(program, "program")?.0)))
}

/// Apply loop lifting, SSA and GVN up to `level`, producing a new program.
///
/// # Safety
/// `program` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ng_program_transform(program: *const NgProgram, level: NgLevel, out: *mut *mut NgProgram) -> NgStatus {
    guard(|| {
        let p = handle(program, "program")?;
        let t = transform(&p.0, level.into()).map_err(|e| pipeline_failure(NgStatus::TransformError, e))?;
        put(out, NgProgram(t.program))
    })
}

/// Transform to `level`, solve points-to constraints and classify every
/// non-null assertion.
///
/// # Safety
/// `program` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ng_analyze(
    program: *const NgProgram,
    level: NgLevel,
    solver: NgSolver,
    out: *mut *mut NgReport,
) -> NgStatus {
    guard(|| {
        let p = handle(program, "program")?;
        let opts = Options { level: level.into(), solver: solver.into() };
        let a = analyze(&p.0, opts).map_err(|e| pipeline_failure(NgStatus::TransformError, e))?;
        put(out, NgReport(a.report))
    })
}

/// # Safety
/// `report` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ng_report_free(report: *mut NgReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Number of assertions, or 0 for a null handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ng_report_asserts_total(report: *const NgReport) -> usize {
    report.as_ref().map_or(0, |r| r.0.asserts_total)
}

/// Number of assertions not proved safe, or 0 for a null handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ng_report_asserts_unproved(report: *const NgReport) -> usize {
    report.as_ref().map_or(0, |r| r.0.asserts_unproved)
}

/// Verdict of the `index`-th assertion in program order.
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ng_report_verdict(report: *const NgReport, index: usize, out: *mut NgVerdict) -> NgStatus {
    guard(|| {
        let r = handle(report, "report")?;
        let a = r.0.per_assert.get(index).ok_or_else(|| {
            Failure(NgStatus::OutOfRange, format!("assertion {index} of {}", r.0.per_assert.len()))
        })?;
        if out.is_null() {
            return Err(Failure::null("output pointer"));
        }
        *out = match a.verdict {
            Verdict::Safe => NgVerdict::Safe,
            Verdict::Unproved => NgVerdict::Unproved,
        };
        Ok(())
    })
}

/// The full report as JSON. Free the result with [`ng_string_free`].
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ng_report_json(report: *const NgReport, out: *mut *mut c_char) -> NgStatus {
    guard(|| {
        let r = handle(report, "report")?;
        let json = serde_json::to_string(&r.0).map_err(|e| Failure(NgStatus::Internal, e.to_string()))?;
        put_string(out, json)
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ng_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
