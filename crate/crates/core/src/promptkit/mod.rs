//! Repair prompts and patch extraction.
//!
//! A prompt has three parts: fixed system instructions, a frozen one-shot
//! example (buggy function with its trace, then the fixed function), and the
//! debugging information for the bug at hand. Model output is parsed back by
//! looking for [`MARKER`].

mod extract;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::BugCase;
use crate::minilang::builtins::Builtin;
use crate::minilang::{FunctionDef, Program};
use crate::tracer::{render_traces, AblationMode, ExecutionTrace, TraceCaps, TraceEvent};
use crate::validator::ValidationVerdict;

pub use extract::{extract_patch, ExtractionError};

pub const MARKER: &str = "// FIXED_FUNCTION";

pub const SYSTEM_TEXT: &str = include_str!("../../../../assets/prompts/system.txt");
pub const EXAMPLE_INPUT: &str = include_str!("../../../../assets/prompts/example_input.txt");
pub const EXAMPLE_OUTPUT: &str = include_str!("../../../../assets/prompts/example_output.txt");

const TRUNCATION_MARKER: &str = "... [truncated to fit the prompt budget]";
const DIFFERENT_FIX: &str = "None of the attempts above is correct. Write a fix that differs from every one of them.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptCaps {
    pub max_chars: usize,
}

impl Default for PromptCaps {
    fn default() -> Self {
        PromptCaps { max_chars: 24_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextCaps {
    pub max_callees: usize,
}

impl Default for ContextCaps {
    fn default() -> Self {
        ContextCaps { max_callees: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_text: String,
    pub example_input: String,
    pub example_output: String,
    pub debug_info: String,
    pub mode: AblationMode,
    pub token_estimate: usize,
}

impl PromptBundle {
    pub fn total_chars(&self) -> usize {
        [&self.system_text, &self.example_input, &self.example_output, &self.debug_info]
            .iter()
            .map(|s| s.chars().count())
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallContext {
    pub callee: String,
    pub signature: String,
    /// Source of a program function; `None` for builtins.
    pub source: Option<String>,
}

/// Breadth and depth index of the attempt that produced a patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub struct Origin {
    pub b: u32,
    pub d: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Patch {
    pub function_source: String,
    pub origin_attempt: Origin,
    pub verdict: Option<ValidationVerdict>,
}

/// A prior attempt as shown to the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub origin: Origin,
    pub source: String,
    pub result_line: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchHistory {
    pub entries: Vec<HistoryEntry>,
}

impl PatchHistory {
    pub fn push(&mut self, entry: HistoryEntry) {
        self.entries.push(entry);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("target function `{0}` not found in program")]
    MissingTarget(String),
    #[error("target function alone needs {needed} characters, budget is {max}")]
    Oversize { needed: usize, max: usize },
}

fn function_signature(f: &FunctionDef) -> String {
    format!("fn {}({})", f.name, f.params.join(", "))
}

/// One context per distinct callee seen in `Call` events, in first-occurrence order.
pub fn collect_call_context(program: &Program, traces: &[ExecutionTrace], caps: ContextCaps) -> Vec<CallContext> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let callees = traces.iter().flat_map(|t| &t.events).filter_map(|e| match e {
        TraceEvent::Call { callee, .. } => Some(callee.as_str()),
        _ => None,
    });
    for callee in callees {
        if out.len() >= caps.max_callees {
            break;
        }
        if !seen.insert(callee) {
            continue;
        }
        let ctx = if let Some(f) = program.function(callee) {
            CallContext { callee: callee.to_string(), signature: function_signature(f), source: Some(f.text.clone()) }
        } else if let Some(b) = Builtin::lookup(callee) {
            CallContext { callee: callee.to_string(), signature: b.signature().to_string(), source: None }
        } else {
            continue;
        };
        out.push(ctx);
    }
    out
}

struct Section {
    title: String,
    body: String,
}

impl Section {
    fn render(&self) -> String {
        format!("### {}\n{}", self.title, self.body)
    }
}

fn ensure_newline(mut s: String) -> String {
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

fn render_contexts(contexts: &[CallContext]) -> String {
    let mut out = String::new();
    for c in contexts {
        match &c.source {
            Some(src) => {
                out.push_str(&format!("// {}\n", c.signature));
                out.push_str(&ensure_newline(src.clone()));
            }
            None => out.push_str(&format!("// {}\n", c.signature)),
        }
    }
    out
}

fn render_history(history: &PatchHistory) -> String {
    let mut out = String::new();
    for (i, e) in history.entries.iter().enumerate() {
        out.push_str(&format!("Attempt {} (round {}, step {}):\n", i + 1, e.origin.b, e.origin.d));
        out.push_str(&ensure_newline(e.source.trim_end().to_string()));
        out.push_str(&format!("Result: {}\n\n", e.result_line));
    }
    out.push_str(DIFFERENT_FIX);
    out.push('\n');
    out
}

/// Cuts whole lines from the end of `body` until it is at most `budget`
/// characters including the marker line. Returns an empty string when not
/// even the marker fits.
fn shrink(body: &str, budget: usize) -> String {
    let marker_len = TRUNCATION_MARKER.chars().count() + 1;
    if budget < marker_len {
        return String::new();
    }
    let mut kept = String::new();
    let mut used = 0;
    for line in body.lines() {
        let n = line.chars().count() + 1;
        if used + n + marker_len > budget {
            break;
        }
        used += n;
        kept.push_str(line);
        kept.push('\n');
    }
    kept.push_str(TRUNCATION_MARKER);
    kept.push('\n');
    kept
}

/// Renders the debugging-information part of a prompt.
///
/// Order: target source, traces, call contexts, history. When over budget,
/// traces are cut first, then contexts, then history; the target source is
/// never cut.
pub fn render_debug_info(
    target: &FunctionDef,
    traces: &[ExecutionTrace],
    contexts: &[CallContext],
    history: &PatchHistory,
    mode: AblationMode,
    trace_caps: &TraceCaps,
    max_chars: usize,
) -> Result<String, PromptError> {
    let head = Section {
        title: format!("Function to repair: `{}` (lines {}-{})", target.name, target.span.start, target.span.end),
        body: ensure_newline(target.text.clone()),
    };

    // Empty bodies are omitted from the output.
    let traces_title = if mode.shows_events() { "Runtime traces of the failing tests" } else { "Failing tests" };
    let traces_body = if mode == AblationMode::Pure || traces.is_empty() {
        String::new()
    } else {
        ensure_newline(render_traces(traces, trace_caps, mode))
    };
    let contexts_body = if mode.shows_call_context() { render_contexts(contexts) } else { String::new() };
    let history_body = if history.is_empty() { String::new() } else { render_history(history) };
    let mut optional = vec![
        Section { title: traces_title.into(), body: traces_body },
        Section { title: "Call context".into(), body: contexts_body },
        Section { title: "Previous attempts".into(), body: history_body },
    ];

    let head_text = head.render();
    let head_len = head_text.chars().count();
    if head_len > max_chars {
        return Err(PromptError::Oversize { needed: head_len, max: max_chars });
    }

    let assemble = |sections: &[Section]| {
        let mut parts = vec![head_text.clone()];
        parts.extend(sections.iter().filter(|s| !s.body.is_empty()).map(Section::render));
        parts.join("\n")
    };

    let mut text = assemble(&optional);
    for i in 0..optional.len() {
        let len = text.chars().count();
        if len <= max_chars {
            break;
        }
        if optional[i].body.is_empty() {
            continue;
        }
        let excess = len - max_chars;
        let current = optional[i].body.chars().count();
        let budget = current.saturating_sub(excess);
        optional[i].body = shrink(&optional[i].body, budget);
        text = assemble(&optional);
    }
    Ok(text)
}

/// Builds the full prompt for one attempt.
#[allow(clippy::too_many_arguments)]
pub fn build_repair_prompt(
    bug: &BugCase,
    program_version: &Program,
    traces: &[ExecutionTrace],
    contexts: &[CallContext],
    history: &PatchHistory,
    mode: AblationMode,
    trace_caps: &TraceCaps,
    caps: PromptCaps,
) -> Result<PromptBundle, PromptError> {
    let target = program_version
        .function(&bug.target_function)
        .ok_or_else(|| PromptError::MissingTarget(bug.target_function.clone()))?;
    let fixed = SYSTEM_TEXT.chars().count() + EXAMPLE_INPUT.chars().count() + EXAMPLE_OUTPUT.chars().count();
    let budget = caps.max_chars.saturating_sub(fixed);
    let debug_info = render_debug_info(target, traces, contexts, history, mode, trace_caps, budget).map_err(|e| match e {
        PromptError::Oversize { needed, .. } => PromptError::Oversize { needed: needed + fixed, max: caps.max_chars },
        other => other,
    })?;
    let mut bundle = PromptBundle {
        system_text: SYSTEM_TEXT.to_string(),
        example_input: EXAMPLE_INPUT.to_string(),
        example_output: EXAMPLE_OUTPUT.to_string(),
        debug_info,
        mode,
        token_estimate: 0,
    };
    bundle.token_estimate = bundle.total_chars().div_ceil(4);
    Ok(bundle)
}
