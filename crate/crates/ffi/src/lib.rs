//! C ABI over the tracefix engine.
//!
//! Every function returns a [`TfStatus`]. Results come back through out
//! pointers. Strings handed to the caller are NUL-terminated, heap allocated,
//! and must be released with [`tf_string_free`]. Programs and bugs are opaque
//! handles released with their own `_free` function. On failure a message is
//! stored per thread and can be fetched with [`tf_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use tracefix::corpus::BugCase;
use tracefix::lpr::{self, LogPaths, LprConfig};
use tracefix::minilang::{self, ExecLimits, Program, Value};
use tracefix::patchgen::{build_generator, GeneratorConfig};
use tracefix::promptkit::extract_patch;
use tracefix::tracer::{render_traces, trace_failing_tests, AblationMode, TraceCaps};
use tracefix::validator::validate;

/// Result code of every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Io = 4,
    InvalidArgument = 5,
    Runtime = 6,
    Extraction = 7,
    Repair = 8,
    Panic = 9,
}

/// Parsed program.
pub struct TfProgram {
    inner: Program,
}

/// Loaded bug case.
pub struct TfBug {
    inner: BugCase,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

type FfiResult<T> = Result<T, (TfStatus, String)>;

fn guard(f: impl FnOnce() -> FfiResult<()>) -> TfStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TfStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            TfStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err((TfStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (TfStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn read_opt_str<'a>(p: *const c_char, what: &str) -> FfiResult<Option<&'a str>> {
    if p.is_null() {
        Ok(None)
    } else {
        read_str(p, what).map(Some)
    }
}

unsafe fn write_out<T>(out: *mut T, value: T) -> FfiResult<()> {
    if out.is_null() {
        return Err((TfStatus::NullArgument, "output pointer is null".into()));
    }
    out.write(value);
    Ok(())
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> FfiResult<()> {
    let c = CString::new(s.replace('\0', " ")).expect("interior NULs removed");
    write_out(out, c.into_raw())
}

unsafe fn check_out<T>(out: *mut T) -> FfiResult<()> {
    if out.is_null() {
        Err((TfStatus::NullArgument, "output pointer is null".into()))
    } else {
        Ok(())
    }
}

unsafe fn program_ref<'a>(p: *const TfProgram) -> FfiResult<&'a TfProgram> {
    p.as_ref().ok_or((TfStatus::NullArgument, "program handle is null".into()))
}

unsafe fn bug_ref<'a>(p: *const TfBug) -> FfiResult<&'a TfBug> {
    p.as_ref().ok_or((TfStatus::NullArgument, "bug handle is null".into()))
}

/// Message for the last failed call on this thread, or NULL. Free with
/// [`tf_string_free`].
#[no_mangle]
pub extern "C" fn tf_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |c| c.clone().into_raw()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn tf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn tf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses and resolves `source`.
///
/// # Safety
/// `source` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tf_program_parse(source: *const c_char, out: *mut *mut TfProgram) -> TfStatus {
    guard(|| {
        check_out(out)?;
        let src = read_str(source, "source")?;
        let program = minilang::parse(src).map_err(|e| (TfStatus::Parse, e.to_string()))?;
        write_out(out, Box::into_raw(Box::new(TfProgram { inner: program })))
    })
}

/// # Safety
/// `program` must come from [`tf_program_parse`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn tf_program_free(program: *mut TfProgram) {
    if !program.is_null() {
        drop(Box::from_raw(program));
    }
}

/// Canonical source text of the program.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn tf_program_print(program: *const TfProgram, out: *mut *mut c_char) -> TfStatus {
    guard(|| {
        check_out(out)?;
        let p = program_ref(program)?;
        write_string(out, minilang::print(&p.inner))
    })
}

/// Calls `entry` with `args_json`, a JSON array of tagged values such as
/// `[{"type":"Int","value":3}]`. The outcome is written as JSON. A runtime
/// error inside the program is a normal outcome, not a failed call.
///
/// # Safety
/// Pointers must be valid; `args_json` may be NULL for no arguments.
#[no_mangle]
pub unsafe extern "C" fn tf_program_interpret(
    program: *const TfProgram,
    entry: *const c_char,
    args_json: *const c_char,
    max_steps: u64,
    out_json: *mut *mut c_char,
) -> TfStatus {
    guard(|| {
        check_out(out_json)?;
        let p = program_ref(program)?;
        let entry = read_str(entry, "entry")?;
        let args: Vec<Value> = match read_opt_str(args_json, "args_json")? {
            None => Vec::new(),
            Some(text) => serde_json::from_str(text).map_err(|e| (TfStatus::InvalidArgument, format!("args_json: {e}")))?,
        };
        let limits = ExecLimits { max_steps, ..ExecLimits::default() };
        let outcome =
            minilang::interpret(&p.inner, entry, args, limits).map_err(|e| (TfStatus::Runtime, e.to_string()))?;
        write_string(out_json, serde_json::to_string(&outcome).expect("outcome serializes"))
    })
}

/// Loads a bug directory (`bug.json`, `program.mini`, `tests.mini`, ...).
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn tf_bug_load(dir: *const c_char, out: *mut *mut TfBug) -> TfStatus {
    guard(|| {
        check_out(out)?;
        let dir = read_str(dir, "dir")?;
        let bug = BugCase::load(Path::new(dir)).map_err(|e| (TfStatus::Io, e.to_string()))?;
        write_out(out, Box::into_raw(Box::new(TfBug { inner: bug })))
    })
}

/// # Safety
/// `bug` must come from [`tf_bug_load`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn tf_bug_free(bug: *mut TfBug) {
    if !bug.is_null() {
        drop(Box::from_raw(bug));
    }
}

/// Renders the failing-test traces of the bug's target function. `mode` is an
/// ablation mode name such as `full`; NULL means `full`.
///
/// # Safety
/// Pointers must be valid; `mode` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn tf_bug_trace(bug: *const TfBug, mode: *const c_char, out_text: *mut *mut c_char) -> TfStatus {
    guard(|| {
        check_out(out_text)?;
        let b = &bug_ref(bug)?.inner;
        let mode: AblationMode = match read_opt_str(mode, "mode")? {
            None => AblationMode::Full,
            Some(m) => m.parse().map_err(|e: String| (TfStatus::InvalidArgument, e))?,
        };
        let caps = TraceCaps::default();
        let traces = trace_failing_tests(&b.program, &b.suite, &b.target_function, ExecLimits::default(), caps)
            .map_err(|e| (TfStatus::Runtime, e.to_string()))?;
        write_string(out_text, render_traces(&traces, &caps, mode))
    })
}

/// Splices `function_source` into the bug and runs its tests. Writes the
/// validation result as JSON.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn tf_bug_validate(
    bug: *const TfBug,
    function_source: *const c_char,
    out_json: *mut *mut c_char,
) -> TfStatus {
    guard(|| {
        check_out(out_json)?;
        let b = &bug_ref(bug)?.inner;
        let src = read_str(function_source, "function_source")?;
        write_string(out_json, serde_json::to_string(&validate(b, src, ExecLimits::default())).expect("result serializes"))
    })
}

/// Extracts the fixed `target` function from raw model output.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn tf_extract_patch(
    model_output: *const c_char,
    target: *const c_char,
    out_source: *mut *mut c_char,
) -> TfStatus {
    guard(|| {
        check_out(out_source)?;
        let output = read_str(model_output, "model_output")?;
        let target = read_str(target, "target")?;
        let patch = extract_patch(output, target).map_err(|e| (TfStatus::Extraction, e.to_string()))?;
        write_string(out_source, patch.function_source)
    })
}

/// Runs the repair loop. With `endpoint` set the HTTP generator is used (API
/// key from the environment); otherwise `script_path` names a scripted plan.
/// `session_log` may be NULL. Writes the outcome as JSON.
///
/// # Safety
/// Pointers must be valid; `script_path`, `endpoint` and `session_log` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn tf_bug_repair(
    bug: *const TfBug,
    breadth: u32,
    depth: u32,
    script_path: *const c_char,
    endpoint: *const c_char,
    session_log: *const c_char,
    out_json: *mut *mut c_char,
) -> TfStatus {
    guard(|| {
        check_out(out_json)?;
        let b = &bug_ref(bug)?.inner;
        let gen_config = match (read_opt_str(endpoint, "endpoint")?, read_opt_str(script_path, "script_path")?) {
            (Some(url), _) => GeneratorConfig::http(url),
            (None, Some(path)) => GeneratorConfig::scripted(Path::new(path)),
            (None, None) => return Err((TfStatus::InvalidArgument, "either script_path or endpoint is required".into())),
        };
        let config = LprConfig { breadth, depth, ..LprConfig::default() };
        config.validate().map_err(|e| (TfStatus::InvalidArgument, e.to_string()))?;
        let generator = build_generator(&gen_config).map_err(|e| (TfStatus::InvalidArgument, e.to_string()))?;
        let log = read_opt_str(session_log, "session_log")?.map(Path::new);
        let logs = LogPaths { session: log, generation: None };
        let summary = lpr::repair_with(b, &config, generator.as_ref(), &gen_config, logs)
            .map_err(|e| (TfStatus::Repair, e.to_string()))?;
        write_string(out_json, serde_json::to_string(&summary.outcome).expect("outcome serializes"))
    })
}
