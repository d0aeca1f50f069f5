use serde::Serialize;

use super::{AblationMode, ExecutionTrace, TraceCaps, TraceEvent};

pub const LEGEND: &str = "Legend: each `Runtime context` line below is one event observed inside the target function, \
in execution order: a local variable write, a branch condition with its outcome, or a call made with its arguments and returned value.";

const NO_EVENTS: &str = "(no events recorded)";

pub fn render_event(event: &TraceEvent) -> String {
    match event {
        TraceEvent::VarWrite { line, name, value_repr } => {
            format!("Runtime context at line {line} -> Local Variable {name} = {value_repr}")
        }
        TraceEvent::Branch { line, condition_text, outcome } => {
            format!("Runtime context at line {line} -> Branch ({condition_text}) evaluated {outcome}")
        }
        TraceEvent::Call { line, callee, arg_reprs } => {
            format!("Runtime context at line {line} -> Call {callee}({})", arg_reprs.join(", "))
        }
        TraceEvent::Return { line, callee, value_repr } => {
            format!("Runtime context at line {line} -> Return {callee} = {value_repr}")
        }
    }
}

fn header(trace: &ExecutionTrace) -> String {
    match trace.outcome.failure_message() {
        Some(msg) => format!("Test `{}` failed: {msg}", trace.test_name),
        None => format!("Test `{}` passed", trace.test_name),
    }
}

/// Renders one trace as prompt-ready text.
///
/// Every kept event maps to exactly one line; ablation modes only ever drop
/// whole event lines. `ExceptionOnly` keeps just the failure line and `Pure`
/// renders nothing.
pub fn render_trace(trace: &ExecutionTrace, caps: &TraceCaps, mode: AblationMode) -> String {
    match mode {
        AblationMode::Pure => return String::new(),
        AblationMode::ExceptionOnly => return format!("{}\n", header(trace)),
        _ => {}
    }
    let mut out = format!("{}\n{LEGEND}\n", header(trace));
    if trace.events.is_empty() {
        out.push_str(NO_EVENTS);
        out.push('\n');
        return out;
    }

    // Re-apply the cap in case the trace was captured with a looser one.
    let (events, extra_dropped, cut_at) = recap(trace, caps);
    let dropped = trace.dropped_count + extra_dropped;
    for (i, event) in events.iter().enumerate() {
        if dropped > 0 && Some(i) == cut_at {
            out.push_str(&format!("... {dropped} events omitted ...\n"));
        }
        if mode.keeps(event) {
            out.push_str(&render_event(event));
            out.push('\n');
        }
    }
    if dropped > 0 && cut_at == Some(events.len()) {
        out.push_str(&format!("... {dropped} events omitted ...\n"));
    }
    out
}

fn recap<'a>(trace: &'a ExecutionTrace, caps: &TraceCaps) -> (Vec<&'a TraceEvent>, usize, Option<usize>) {
    let n = trace.events.len();
    if n <= caps.max_events {
        return (trace.events.iter().collect(), 0, trace.cut_at);
    }
    let head = caps.max_events / 2;
    let tail = caps.max_events - head;
    let mut kept: Vec<&TraceEvent> = trace.events[..head].iter().collect();
    kept.extend(trace.events[n - tail..].iter());
    (kept, n - caps.max_events, Some(head))
}

/// Concatenates renderings of several traces, separated by blank lines.
pub fn render_traces(traces: &[ExecutionTrace], caps: &TraceCaps, mode: AblationMode) -> String {
    traces
        .iter()
        .map(|t| render_trace(t, caps, mode))
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Serialize)]
struct JsonlRecord<'a> {
    seq: usize,
    kind: &'static str,
    line: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    name: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    condition: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    callee: Option<&'a str>,
    repr: String,
    test: &'a str,
}

/// One JSON object per kept event, newline-terminated.
pub fn trace_jsonl(trace: &ExecutionTrace) -> String {
    let mut out = String::new();
    for (seq, event) in trace.events.iter().enumerate() {
        let test = trace.test_name.as_str();
        let rec = match event {
            TraceEvent::VarWrite { line, name, value_repr } => JsonlRecord {
                seq,
                kind: "var_write",
                line: *line,
                name: Some(name),
                condition: None,
                callee: None,
                repr: value_repr.clone(),
                test,
            },
            TraceEvent::Branch { line, condition_text, outcome } => JsonlRecord {
                seq,
                kind: "branch",
                line: *line,
                name: None,
                condition: Some(condition_text),
                callee: None,
                repr: outcome.to_string(),
                test,
            },
            TraceEvent::Call { line, callee, arg_reprs } => JsonlRecord {
                seq,
                kind: "call",
                line: *line,
                name: None,
                condition: None,
                callee: Some(callee),
                repr: format!("({})", arg_reprs.join(", ")),
                test,
            },
            TraceEvent::Return { line, callee, value_repr } => JsonlRecord {
                seq,
                kind: "return",
                line: *line,
                name: None,
                condition: None,
                callee: Some(callee),
                repr: value_repr.clone(),
                test,
            },
        };
        out.push_str(&serde_json::to_string(&rec).expect("trace record serializes"));
        out.push('\n');
    }
    out
}
