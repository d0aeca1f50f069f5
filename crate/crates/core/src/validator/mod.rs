//! Applies a candidate patch, runs the full test suite and routes the result.

use std::panic::{self, AssertUnwindSafe};
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::BugCase;
use crate::minilang::{parse_unresolved, replace_function, resolve_suite, run_tests, ExecLimits, Program, ReplaceError, TestReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FatalKind {
    TargetMissing,
    HarnessPanic,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum ValidationResult {
    CompileError { diag: String },
    FatalError { kind: FatalKind, detail: String },
    Tests { report: TestReport },
}

impl ValidationResult {
    pub fn report(&self) -> Option<&TestReport> {
        match self {
            ValidationResult::Tests { report } => Some(report),
            _ => None,
        }
    }

    pub fn counts(&self) -> (usize, usize) {
        self.report().map_or((0, 0), |r| (r.passed_count(), r.failed_count()))
    }

    /// One line for the patch history shown in later prompts.
    pub fn summary(&self) -> String {
        match self {
            ValidationResult::CompileError { diag } => format!("compile error: {diag}"),
            ValidationResult::FatalError { detail, .. } => format!("fatal error: {detail}"),
            ValidationResult::Tests { report } => {
                let n = report.results.len();
                let failed: Vec<&str> = report.failing().map(|r| r.name.as_str()).collect();
                if failed.is_empty() {
                    format!("passed all {n} tests")
                } else {
                    format!("failed {} of {n} tests: {}", failed.len(), failed.join(", "))
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationVerdict {
    AllPass,
    Refinable,
    Discard,
}

pub fn classify(result: &ValidationResult) -> ValidationVerdict {
    classify_with(result, false)
}

/// With `requires_partial_pass`, a report in which no test passes is
/// discarded instead of refined.
pub fn classify_with(result: &ValidationResult, requires_partial_pass: bool) -> ValidationVerdict {
    match result {
        ValidationResult::CompileError { .. } | ValidationResult::FatalError { .. } => ValidationVerdict::Discard,
        ValidationResult::Tests { report } if report.failed_count() == 0 => ValidationVerdict::AllPass,
        ValidationResult::Tests { report } if requires_partial_pass && report.passed_count() == 0 => {
            ValidationVerdict::Discard
        }
        ValidationResult::Tests { .. } => ValidationVerdict::Refinable,
    }
}

/// Splices `function_source` over the bug's target function.
pub fn apply_patch(bug: &BugCase, function_source: &str) -> Result<Program, ValidationResult> {
    match replace_function(&bug.program, &bug.target_function, function_source) {
        Ok(p) => Ok(p),
        Err(ReplaceError::UnknownTarget(t)) => Err(ValidationResult::FatalError {
            kind: FatalKind::TargetMissing,
            detail: format!("target `{t}` missing from program"),
        }),
        Err(e) => Err(ValidationResult::CompileError { diag: e.to_string() }),
    }
}

pub fn validate(bug: &BugCase, function_source: &str, limits: ExecLimits) -> ValidationResult {
    let patched = match apply_patch(bug, function_source) {
        Ok(p) => p,
        Err(r) => return r,
    };
    if let Err(e) = resolve_suite(&bug.suite, &patched) {
        return ValidationResult::CompileError { diag: format!("tests do not compile against patch: {e}") };
    }
    if patched.function(&bug.target_function).is_none() {
        return ValidationResult::FatalError {
            kind: FatalKind::TargetMissing,
            detail: format!("target `{}` missing after splice", bug.target_function),
        };
    }
    match panic::catch_unwind(AssertUnwindSafe(|| run_tests(&patched, &bug.suite.cases, limits))) {
        Ok(report) => ValidationResult::Tests { report },
        Err(p) => ValidationResult::FatalError { kind: FatalKind::HarnessPanic, detail: panic_text(&p) },
    }
}

/// [`validate`] with a wall-clock backstop. On timeout the worker thread is
/// abandoned; the interpreter's step budget guarantees it eventually stops.
pub fn validate_with_timeout(bug: &BugCase, function_source: &str, limits: ExecLimits, timeout: Duration) -> ValidationResult {
    let (tx, rx) = mpsc::channel();
    let bug = bug.clone();
    let src = function_source.to_string();
    thread::spawn(move || {
        let _ = tx.send(validate(&bug, &src, limits));
    });
    match rx.recv_timeout(timeout) {
        Ok(r) => r,
        Err(mpsc::RecvTimeoutError::Timeout) => ValidationResult::FatalError {
            kind: FatalKind::Timeout,
            detail: format!("validation exceeded {} ms", timeout.as_millis()),
        },
        Err(mpsc::RecvTimeoutError::Disconnected) => {
            ValidationResult::FatalError { kind: FatalKind::HarnessPanic, detail: "validation worker died".into() }
        }
    }
}

fn panic_text(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "panic".to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefMatch {
    Yes,
    No,
    Unknown,
}

/// AST comparison against the shipped reference fix, ignoring layout.
pub fn matches_reference(bug: &BugCase, function_source: &str) -> RefMatch {
    let Some(reference) = bug.reference_fix() else {
        return RefMatch::Unknown;
    };
    let (Ok(a), Ok(b)) = (parse_unresolved(reference), parse_unresolved(function_source)) else {
        return RefMatch::Unknown;
    };
    match (a.function(&bug.target_function), b.function(&bug.target_function)) {
        (Some(x), Some(y)) if x.same_structure(y) => RefMatch::Yes,
        (Some(_), Some(_)) => RefMatch::No,
        _ => RefMatch::Unknown,
    }
}
