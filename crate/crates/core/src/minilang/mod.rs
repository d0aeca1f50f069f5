//! The `.mini` language: parser, resolver, pretty-printer and a deterministic
//! tree-walking interpreter, plus the test-suite runner and function splicing
//! used when validating candidate patches.

mod ast;
pub mod builtins;
mod interp;
mod lexer;
mod parser;
mod printer;
mod resolve;
mod value;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ast::{BinaryOp, Expr, FunctionDef, LValue, Program, Span, Stmt, UnaryOp};
pub use interp::{repr, values_equal, ErrorKind, ExecLimits, ExecOutcome, Machine, NoopObserver, Observer, RuntimeError};
pub use printer::{format_float, print_expr, print_function, quote_str};
pub use value::{RenderLimits, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: u32,
    pub col: u32,
    pub message: String,
}

impl ParseError {
    pub fn new(line: u32, col: u32, message: impl Into<String>) -> Self {
        ParseError { line, col, message: message.into() }
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{error}")]
    Parse { path: String, error: ParseError },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EntryError {
    #[error("no function named `{0}`")]
    UnknownFunction(String),
    #[error("`{name}` takes {expected} arguments, {given} given")]
    ArityMismatch { name: String, expected: usize, given: usize },
    #[error("max_steps must be at least 1")]
    ZeroBudget,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplaceError {
    #[error("no function named `{0}` in program")]
    UnknownTarget(String),
    #[error("replacement does not parse: {0}")]
    Parse(ParseError),
    #[error("replacement defines `{found}`, expected `{expected}`")]
    NameMismatch { expected: String, found: String },
}

/// Parses and resolves a standalone program.
pub fn parse(source: &str) -> Result<Program, ParseError> {
    parse_named(source, "<input>")
}

pub fn parse_named(source: &str, source_path: &str) -> Result<Program, ParseError> {
    let program = parser::parse_unresolved(source, source_path)?;
    resolve::resolve(&program.functions, &program.functions)?;
    Ok(program)
}

/// Parses without checking that calls resolve. Used for fragments such as a
/// single replacement function.
pub fn parse_unresolved(source: &str) -> Result<Program, ParseError> {
    parser::parse_unresolved(source, "<fragment>")
}

pub fn parse_file(path: &Path) -> Result<Program, LoadError> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io { path: display.clone(), source })?;
    parse_named(&text, &display).map_err(|error| LoadError::Parse { path: display, error })
}

pub fn print(program: &Program) -> String {
    printer::print_program(program)
}

pub fn interpret(program: &Program, entry: &str, args: Vec<Value>, limits: ExecLimits) -> Result<ExecOutcome, EntryError> {
    interpret_observed(program, entry, args, limits, &mut NoopObserver)
}

pub fn interpret_observed<O: Observer>(
    program: &Program,
    entry: &str,
    args: Vec<Value>,
    limits: ExecLimits,
    observer: &mut O,
) -> Result<ExecOutcome, EntryError> {
    if limits.max_steps == 0 {
        return Err(EntryError::ZeroBudget);
    }
    let f = program.function(entry).ok_or_else(|| EntryError::UnknownFunction(entry.to_string()))?;
    if f.params.len() != args.len() {
        return Err(EntryError::ArityMismatch { name: entry.to_string(), expected: f.params.len(), given: args.len() });
    }
    let mut machine = Machine::new(&program.functions, limits, observer);
    Ok(machine.run(entry, args))
}

/// Swaps `target` for the single function defined in `replacement_source`.
///
/// Line numbers are rewritten as if the replacement text had been pasted over
/// the target's lines: the new function starts on the target's first line and
/// later functions shift by the change in length.
pub fn replace_function(program: &Program, target: &str, replacement_source: &str) -> Result<Program, ReplaceError> {
    let idx = program
        .functions
        .iter()
        .position(|f| f.name == target)
        .ok_or_else(|| ReplaceError::UnknownTarget(target.to_string()))?;
    let fragment = parser::parse_unresolved(replacement_source, &program.source_path).map_err(ReplaceError::Parse)?;
    if fragment.functions.len() != 1 {
        return Err(ReplaceError::Parse(ParseError::new(
            1,
            1,
            format!("expected exactly one function definition, found {}", fragment.functions.len()),
        )));
    }
    let mut replacement = fragment.functions.into_iter().next().unwrap();
    if replacement.name != target {
        return Err(ReplaceError::NameMismatch { expected: target.to_string(), found: replacement.name });
    }
    let old = program.functions[idx].span;
    let new_len = replacement.span.end - replacement.span.start;
    let lead = old.start as i64 - replacement.span.start as i64;
    shift_function(&mut replacement, lead);
    let delta = new_len as i64 - (old.end - old.start) as i64;

    let mut out = program.clone();
    out.functions[idx] = replacement;
    for f in &mut out.functions[idx + 1..] {
        shift_function(f, delta);
    }
    resolve::resolve(&out.functions, &out.functions).map_err(ReplaceError::Parse)?;
    Ok(out)
}

fn shift_function(f: &mut FunctionDef, delta: i64) {
    if delta == 0 {
        return;
    }
    let sh = |l: &mut u32| *l = (*l as i64 + delta) as u32;
    sh(&mut f.span.start);
    sh(&mut f.span.end);
    for s in &mut f.body {
        shift_stmt(s, delta);
    }
}

fn shift_stmt(s: &mut Stmt, delta: i64) {
    let sh = |l: &mut u32| *l = (*l as i64 + delta) as u32;
    match s {
        Stmt::Let { value, line, .. } => {
            sh(line);
            shift_expr(value, delta);
        }
        Stmt::Assign { target, value, line } => {
            sh(line);
            target.indices.iter_mut().for_each(|e| shift_expr(e, delta));
            shift_expr(value, delta);
        }
        Stmt::If { cond, then_body, else_body, line } => {
            sh(line);
            shift_expr(cond, delta);
            then_body.iter_mut().for_each(|s| shift_stmt(s, delta));
            else_body.iter_mut().flatten().for_each(|s| shift_stmt(s, delta));
        }
        Stmt::While { cond, body, line } => {
            sh(line);
            shift_expr(cond, delta);
            body.iter_mut().for_each(|s| shift_stmt(s, delta));
        }
        Stmt::For { start, end, body, line, .. } => {
            sh(line);
            shift_expr(start, delta);
            shift_expr(end, delta);
            body.iter_mut().for_each(|s| shift_stmt(s, delta));
        }
        Stmt::Return { value, line } => {
            sh(line);
            value.iter_mut().for_each(|e| shift_expr(e, delta));
        }
        Stmt::Expr { expr, line } => {
            sh(line);
            shift_expr(expr, delta);
        }
    }
}

fn shift_expr(e: &mut Expr, delta: i64) {
    let sh = |l: &mut u32| *l = (*l as i64 + delta) as u32;
    match e {
        Expr::Int { line, .. } | Expr::Float { line, .. } | Expr::Bool { line, .. } | Expr::Str { line, .. } | Expr::Var { line, .. } => sh(line),
        Expr::Array { items, line } => {
            sh(line);
            items.iter_mut().for_each(|i| shift_expr(i, delta));
        }
        Expr::Index { base, index, line } => {
            sh(line);
            shift_expr(base, delta);
            shift_expr(index, delta);
        }
        Expr::Call { args, line, .. } => {
            sh(line);
            args.iter_mut().for_each(|a| shift_expr(a, delta));
        }
        Expr::Unary { operand, line, .. } => {
            sh(line);
            shift_expr(operand, delta);
        }
        Expr::Binary { lhs, rhs, line, .. } => {
            sh(line);
            shift_expr(lhs, delta);
            shift_expr(rhs, delta);
        }
    }
}

// ---------------------------------------------------------------------------
// Test suites

/// A zero-parameter function whose name begins with `test_`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestCase {
    pub def: FunctionDef,
}

impl TestCase {
    pub fn name(&self) -> &str {
        &self.def.name
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestSuite {
    pub source_path: String,
    pub cases: Vec<TestCase>,
}

impl TestSuite {
    pub fn case(&self, name: &str) -> Option<&TestCase> {
        self.cases.iter().find(|c| c.name() == name)
    }
}

/// Parses a tests file. Calls are left unresolved; see [`resolve_suite`].
pub fn parse_suite(source: &str, source_path: &str) -> Result<TestSuite, ParseError> {
    let p = parser::parse_unresolved(source, source_path)?;
    let mut cases = Vec::new();
    for def in p.functions {
        if !def.name.starts_with("test_") {
            return Err(ParseError::new(def.span.start, 1, format!("test `{}` must be named `test_*`", def.name)));
        }
        if !def.params.is_empty() {
            return Err(ParseError::new(def.span.start, 1, format!("test `{}` must take no parameters", def.name)));
        }
        cases.push(TestCase { def });
    }
    Ok(TestSuite { source_path: source_path.to_string(), cases })
}

/// Checks that every call in the suite resolves against `program`.
pub fn resolve_suite(suite: &TestSuite, program: &Program) -> Result<(), ParseError> {
    resolve::resolve(suite.cases.iter().map(|c| &c.def), &program.functions)
}

pub fn parse_suite_file(path: &Path) -> Result<TestSuite, LoadError> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io { path: display.clone(), source })?;
    parse_suite(&text, &display).map_err(|error| LoadError::Parse { path: display, error })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status")]
pub enum TestStatus {
    Pass,
    AssertFail { line: u32, expected: String, actual: String },
    Crash { outcome: ExecOutcome },
}

impl TestStatus {
    pub fn is_pass(&self) -> bool {
        matches!(self, TestStatus::Pass)
    }

    /// One-line failure description; `None` for a pass.
    pub fn failure_message(&self) -> Option<String> {
        match self {
            TestStatus::Pass => None,
            TestStatus::AssertFail { line, expected, actual } => {
                Some(format!("AssertionFailure at line {line}: expected:<{expected}> but was:<{actual}>"))
            }
            TestStatus::Crash { outcome: ExecOutcome::RuntimeError { error } } => {
                Some(format!("{} at line {} in `{}`: {}", error.kind, error.line, error.function, error.message))
            }
            TestStatus::Crash { outcome: ExecOutcome::BudgetExceeded { steps_used } } => {
                Some(format!("BudgetExceeded after {steps_used} steps"))
            }
            TestStatus::Crash { outcome: ExecOutcome::Completed { .. } } => Some("crash".to_string()),
        }
    }
}

impl fmt::Display for TestStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.failure_message() {
            None => f.write_str("pass"),
            Some(m) => f.write_str(&m),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub name: String,
    #[serde(flatten)]
    pub status: TestStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub results: Vec<TestResult>,
}

impl TestReport {
    pub fn passed_count(&self) -> usize {
        self.results.iter().filter(|r| r.status.is_pass()).count()
    }

    pub fn failed_count(&self) -> usize {
        self.results.len() - self.passed_count()
    }

    pub fn failing(&self) -> impl Iterator<Item = &TestResult> {
        self.results.iter().filter(|r| !r.status.is_pass())
    }
}

/// Classifies a finished test run.
pub fn test_status(outcome: ExecOutcome) -> TestStatus {
    match outcome {
        ExecOutcome::Completed { .. } => TestStatus::Pass,
        ExecOutcome::RuntimeError { error } if error.kind == ErrorKind::AssertionFailure => {
            let (expected, actual) = error.assertion.unwrap_or_default();
            TestStatus::AssertFail { line: error.line, expected, actual }
        }
        other => TestStatus::Crash { outcome: other },
    }
}

/// Runs one test against `program` with a fresh interpreter.
pub fn run_test_observed<O: Observer>(program: &Program, case: &TestCase, limits: ExecLimits, observer: &mut O) -> ExecOutcome {
    let defs = program.functions.iter().chain(std::iter::once(&case.def));
    let mut machine = Machine::new(defs, limits, observer);
    machine.run(case.name(), Vec::new())
}

pub fn run_test(program: &Program, case: &TestCase, limits: ExecLimits) -> TestStatus {
    test_status(run_test_observed(program, case, limits, &mut NoopObserver))
}

/// Runs every test in order, each in isolation; never stops early.
pub fn run_tests(program: &Program, cases: &[TestCase], limits: ExecLimits) -> TestReport {
    let results = cases
        .iter()
        .map(|c| TestResult { name: c.name().to_string(), status: run_test(program, c, limits) })
        .collect();
    TestReport { results }
}
