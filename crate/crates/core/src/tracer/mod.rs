//! Function-level execution tracing.
//!
//! A traced run executes a test exactly as the plain runner would, while an
//! [`Observer`] records variable writes, branch decisions and calls that occur
//! inside one target function. Event lists are capped: when a run produces
//! more than `max_events`, the first half and the last half are kept and the
//! middle is counted in `dropped_count`.

mod render;

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::minilang::{
    print_expr, run_test_observed, test_status, ExecLimits, Expr, Observer, Program, RenderLimits, TestCase,
    TestStatus, TestSuite, Value,
};

pub use render::{render_event, render_trace, render_traces, trace_jsonl, LEGEND};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceEvent {
    VarWrite { line: u32, name: String, value_repr: String },
    Branch { line: u32, condition_text: String, outcome: bool },
    Call { line: u32, callee: String, arg_reprs: Vec<String> },
    Return { line: u32, callee: String, value_repr: String },
}

impl TraceEvent {
    pub fn line(&self) -> u32 {
        match self {
            TraceEvent::VarWrite { line, .. }
            | TraceEvent::Branch { line, .. }
            | TraceEvent::Call { line, .. }
            | TraceEvent::Return { line, .. } => *line,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceCaps {
    pub max_events: usize,
    pub values: RenderLimits,
}

impl Default for TraceCaps {
    fn default() -> Self {
        TraceCaps { max_events: 300, values: RenderLimits::default() }
    }
}

impl TraceCaps {
    pub fn unbounded() -> Self {
        TraceCaps { max_events: usize::MAX, ..TraceCaps::default() }
    }

    fn head_len(&self) -> usize {
        self.max_events / 2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub target_function: String,
    pub test_name: String,
    /// Kept events in execution order; when truncated, the head and the tail
    /// of the full sequence.
    pub events: Vec<TraceEvent>,
    pub truncated: bool,
    pub dropped_count: usize,
    /// Index in `events` where the dropped middle would have been.
    pub cut_at: Option<usize>,
    pub outcome: TestStatus,
}

impl ExecutionTrace {
    pub fn total_events(&self) -> usize {
        self.events.len() + self.dropped_count
    }
}

/// Which event categories reach the prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AblationMode {
    #[default]
    Full,
    WithoutLocalVariables,
    WithoutControlFlow,
    WithoutMethodCall,
    ExceptionOnly,
    Pure,
}

impl AblationMode {
    pub const ALL: [AblationMode; 6] = [
        AblationMode::Full,
        AblationMode::WithoutLocalVariables,
        AblationMode::WithoutControlFlow,
        AblationMode::WithoutMethodCall,
        AblationMode::ExceptionOnly,
        AblationMode::Pure,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AblationMode::Full => "full",
            AblationMode::WithoutLocalVariables => "without-local-variables",
            AblationMode::WithoutControlFlow => "without-control-flow",
            AblationMode::WithoutMethodCall => "without-method-call",
            AblationMode::ExceptionOnly => "exception-only",
            AblationMode::Pure => "pure",
        }
    }

    pub fn keeps(self, event: &TraceEvent) -> bool {
        match (self, event) {
            (AblationMode::Full, _) => true,
            (AblationMode::WithoutLocalVariables, TraceEvent::VarWrite { .. }) => false,
            (AblationMode::WithoutControlFlow, TraceEvent::Branch { .. }) => false,
            (AblationMode::WithoutMethodCall, TraceEvent::Call { .. } | TraceEvent::Return { .. }) => false,
            (AblationMode::ExceptionOnly | AblationMode::Pure, _) => false,
            _ => true,
        }
    }

    pub fn shows_events(self) -> bool {
        !matches!(self, AblationMode::ExceptionOnly | AblationMode::Pure)
    }

    pub fn shows_call_context(self) -> bool {
        matches!(self, AblationMode::Full | AblationMode::WithoutLocalVariables | AblationMode::WithoutControlFlow)
    }
}

impl fmt::Display for AblationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AblationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AblationMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mode `{s}` (expected one of: {})", Self::ALL.map(|m| m.as_str()).join(", ")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("cannot instrument `{0}`: no such function")]
    UnknownFunction(String),
}

/// A program paired with the function whose events should be recorded.
#[derive(Debug, Clone)]
pub struct InstrumentedProgram {
    pub program: Program,
    pub target: String,
}

pub fn instrument(program: &Program, target: &str) -> Result<InstrumentedProgram, TraceError> {
    if program.function(target).is_none() {
        return Err(TraceError::UnknownFunction(target.to_string()));
    }
    Ok(InstrumentedProgram { program: program.clone(), target: target.to_string() })
}

struct Collector<'a> {
    target: &'a str,
    caps: TraceCaps,
    head: Vec<TraceEvent>,
    tail: VecDeque<TraceEvent>,
    total: usize,
}

impl<'a> Collector<'a> {
    fn new(target: &'a str, caps: TraceCaps) -> Self {
        Collector { target, caps, head: Vec::new(), tail: VecDeque::new(), total: 0 }
    }

    fn push(&mut self, event: TraceEvent) {
        self.total += 1;
        if self.head.len() < self.caps.head_len() {
            self.head.push(event);
            return;
        }
        let tail_cap = self.caps.max_events - self.caps.head_len();
        if tail_cap == 0 {
            return;
        }
        if self.tail.len() == tail_cap {
            self.tail.pop_front();
        }
        self.tail.push_back(event);
    }

    fn repr(&self, v: &Value) -> String {
        v.render(self.caps.values)
    }

    fn finish(self, test_name: &str, outcome: TestStatus) -> ExecutionTrace {
        let kept = self.head.len() + self.tail.len();
        let dropped_count = self.total - kept;
        let cut_at = (dropped_count > 0).then_some(self.head.len());
        let mut events = self.head;
        events.extend(self.tail);
        ExecutionTrace {
            target_function: self.target.to_string(),
            test_name: test_name.to_string(),
            events,
            truncated: dropped_count > 0,
            dropped_count,
            cut_at,
            outcome,
        }
    }
}

impl Observer for Collector<'_> {
    fn var_write(&mut self, function: &str, line: u32, name: &str, value: &Value) {
        if function == self.target {
            let value_repr = self.repr(value);
            self.push(TraceEvent::VarWrite { line, name: name.to_string(), value_repr });
        }
    }

    fn branch(&mut self, function: &str, line: u32, cond: &Expr, outcome: bool) {
        if function == self.target {
            self.push(TraceEvent::Branch { line, condition_text: print_expr(cond), outcome });
        }
    }

    fn call(&mut self, function: &str, line: u32, callee: &str, args: &[Value]) {
        if function == self.target {
            let arg_reprs = args.iter().map(|a| self.repr(a)).collect();
            self.push(TraceEvent::Call { line, callee: callee.to_string(), arg_reprs });
        }
    }

    fn ret(&mut self, function: &str, line: u32, callee: &str, value: &Value) {
        if function == self.target {
            let value_repr = self.repr(value);
            self.push(TraceEvent::Return { line, callee: callee.to_string(), value_repr });
        }
    }
}

/// Runs one test under instrumentation. The returned status is identical to
/// what [`crate::minilang::run_test`] reports for the same inputs.
pub fn run_traced(
    instr: &InstrumentedProgram,
    test: &TestCase,
    limits: ExecLimits,
    caps: TraceCaps,
) -> (TestStatus, ExecutionTrace) {
    let mut collector = Collector::new(&instr.target, caps);
    let outcome = run_test_observed(&instr.program, test, limits, &mut collector);
    let status = test_status(outcome);
    let trace = collector.finish(test.name(), status.clone());
    (status, trace)
}

/// Traces every failing test of `program`, in suite order.
pub fn trace_failing_tests(
    program: &Program,
    suite: &TestSuite,
    target: &str,
    limits: ExecLimits,
    caps: TraceCaps,
) -> Result<Vec<ExecutionTrace>, TraceError> {
    let instr = instrument(program, target)?;
    Ok(suite
        .cases
        .iter()
        .map(|case| run_traced(&instr, case, limits, caps).1)
        .filter(|t| !t.outcome.is_pass())
        .collect())
}
