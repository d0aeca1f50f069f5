//! Layered progressive repair.
//!
//! Each breadth round asks for a fresh patch built from the original
//! program's traces. A refinable patch starts a depth phase in which every
//! step re-traces the latest patched program. A round yields at most `depth`
//! candidates, so a run never exceeds `breadth * depth` attempts.

mod log;

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::BugCase;
use crate::minilang::{print, ExecLimits, Program};
use crate::patchgen::{
    build_generator, prompt_hash, sha256_hex, AttemptKey, ConfigError, GenerationError, GenerationRecord, Generator,
    GeneratorConfig,
};
use crate::promptkit::{
    build_repair_prompt, collect_call_context, extract_patch, ContextCaps, HistoryEntry, Origin, PatchHistory,
    PromptCaps, PromptError,
};
use crate::tracer::{trace_failing_tests, AblationMode, ExecutionTrace, TraceCaps, TraceError};
use crate::validator::{apply_patch, classify_with, validate_with_timeout, ValidationVerdict};

pub use log::{read_session_log, AttemptRecord, LogRecord, OutcomeRecord, SessionHeader};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LprConfig {
    pub breadth: u32,
    pub depth: u32,
    pub attempt_timeout_ms: u64,
    pub refinable_requires_partial_pass: bool,
    pub trace_caps: TraceCaps,
    pub prompt_caps: PromptCaps,
    pub context_caps: ContextCaps,
    pub mode: AblationMode,
    pub limits: ExecLimits,
}

impl Default for LprConfig {
    fn default() -> Self {
        LprConfig {
            breadth: 7,
            depth: 5,
            attempt_timeout_ms: 60_000,
            refinable_requires_partial_pass: false,
            trace_caps: TraceCaps::default(),
            prompt_caps: PromptCaps::default(),
            context_caps: ContextCaps::default(),
            mode: AblationMode::Full,
            limits: ExecLimits::default(),
        }
    }
}

impl LprConfig {
    pub fn validate(&self) -> Result<(), LprError> {
        if self.breadth == 0 || self.depth == 0 {
            return Err(LprError::InvalidConfig("breadth and depth must both be at least 1".into()));
        }
        if self.limits.max_steps == 0 {
            return Err(LprError::InvalidConfig("max_steps must be at least 1".into()));
        }
        Ok(())
    }

    pub fn config_hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}

/// Maximum number of candidates a run may generate.
pub fn budget(config: &LprConfig) -> usize {
    config.breadth as usize * config.depth as usize
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RepairOutcome {
    Success { patch_source: String, attempts_used: usize, b: u32, d: u32 },
    Unfixable { attempts_used: usize },
}

impl RepairOutcome {
    pub fn attempts_used(&self) -> usize {
        match self {
            RepairOutcome::Success { attempts_used, .. } | RepairOutcome::Unfixable { attempts_used } => *attempts_used,
        }
    }

    pub fn is_success(&self) -> bool {
        matches!(self, RepairOutcome::Success { .. })
    }
}

#[derive(Debug, Error)]
pub enum LprError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("bug `{0}` is not a bug: the unpatched program passes every test")]
    NotABug(String),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Generator(#[from] ConfigError),
    #[error("session log {path}: {detail}")]
    Io { path: String, detail: String },
    #[error("session log line {line}: {detail}")]
    LogCorrupt { line: usize, detail: String },
    #[error("session log was written with config {found}, current config is {expected}")]
    ConfigMismatch { expected: String, found: String },
}

/// Where a session writes its logs. Both files are append-only jsonl.
#[derive(Debug, Clone, Copy, Default)]
pub struct LogPaths<'a> {
    pub session: Option<&'a Path>,
    pub generation: Option<&'a Path>,
}

/// What a finished session produced.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionSummary {
    pub outcome: RepairOutcome,
    pub attempts: Vec<AttemptRecord>,
}

/// Repairs `bug` with the generator described by `generator`, without logs.
pub fn repair(bug: &BugCase, config: &LprConfig, generator: &GeneratorConfig) -> Result<RepairOutcome, LprError> {
    let g = build_generator(generator)?;
    Ok(repair_with(bug, config, g.as_ref(), generator, LogPaths::default())?.outcome)
}

/// Runs a fresh session, truncating any existing log files.
pub fn repair_with(
    bug: &BugCase,
    config: &LprConfig,
    generator: &dyn Generator,
    gen_config: &GeneratorConfig,
    logs: LogPaths<'_>,
) -> Result<SessionSummary, LprError> {
    config.validate()?;
    let mut sink = Sink::create(logs, false)?;
    let header = SessionHeader { bug_id: bug.id.clone(), config_hash: config.config_hash(), config: config.clone() };
    sink.session(&LogRecord::Session(header))?;
    Session::new(bug, config, generator, gen_config, sink, Vec::new()).run()
}

/// Continues an interrupted session from its log.
///
/// Logged attempts are replayed without calling the generator: their recorded
/// outputs are re-validated and must reproduce the logged prompt hashes and
/// verdicts. New attempts are appended to the same log.
pub fn resume(
    bug: &BugCase,
    config: &LprConfig,
    generator: &dyn Generator,
    gen_config: &GeneratorConfig,
    logs: LogPaths<'_>,
) -> Result<SessionSummary, LprError> {
    config.validate()?;
    let path = logs.session.ok_or_else(|| LprError::InvalidConfig("resume needs a session log path".into()))?;
    let records = read_session_log(path)?;
    let header = match records.first() {
        Some(LogRecord::Session(h)) => h,
        _ => return Err(LprError::LogCorrupt { line: 1, detail: "missing session header".into() }),
    };
    if header.config_hash != config.config_hash() {
        return Err(LprError::ConfigMismatch { expected: config.config_hash(), found: header.config_hash.clone() });
    }
    if header.bug_id != bug.id {
        return Err(LprError::LogCorrupt { line: 1, detail: format!("log is for bug `{}`, not `{}`", header.bug_id, bug.id) });
    }
    let mut replay = Vec::new();
    for (i, r) in records.iter().enumerate().skip(1) {
        match r {
            LogRecord::Attempt(a) => replay.push((i + 1, a.clone())),
            LogRecord::Outcome(o) => {
                let attempts = replay.into_iter().map(|(_, a)| a).collect();
                return Ok(SessionSummary { outcome: o.outcome.clone(), attempts });
            }
            LogRecord::Session(_) => {
                return Err(LprError::LogCorrupt { line: i + 1, detail: "second session header".into() })
            }
        }
    }
    let sink = Sink::create(logs, true)?;
    Session::new(bug, config, generator, gen_config, sink, replay).run()
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

fn program_hash(p: &Program) -> String {
    sha256_hex(print(p).as_bytes())
}

struct Sink {
    session: Option<(String, BufWriter<File>)>,
    generation: Option<(String, BufWriter<File>)>,
}

impl Sink {
    fn create(logs: LogPaths<'_>, append: bool) -> Result<Sink, LprError> {
        let open = |p: Option<&Path>| -> Result<Option<(String, BufWriter<File>)>, LprError> {
            let Some(p) = p else { return Ok(None) };
            let name = p.display().to_string();
            let file = OpenOptions::new()
                .create(true)
                .write(true)
                .append(append)
                .truncate(!append)
                .open(p)
                .map_err(|e| LprError::Io { path: name.clone(), detail: e.to_string() })?;
            Ok(Some((name, BufWriter::new(file))))
        };
        Ok(Sink { session: open(logs.session)?, generation: open(logs.generation)? })
    }

    fn write<T: Serialize>(slot: &mut Option<(String, BufWriter<File>)>, record: &T) -> Result<(), LprError> {
        if let Some((name, w)) = slot {
            let line = serde_json::to_string(record).expect("log record serializes");
            writeln!(w, "{line}")
                .and_then(|_| w.flush())
                .map_err(|e| LprError::Io { path: name.clone(), detail: e.to_string() })?;
        }
        Ok(())
    }

    fn session(&mut self, record: &LogRecord) -> Result<(), LprError> {
        Self::write(&mut self.session, record)
    }

    fn generation(&mut self, record: &GenerationRecord) -> Result<(), LprError> {
        Self::write(&mut self.generation, record)
    }
}

struct Session<'a> {
    bug: &'a BugCase,
    config: &'a LprConfig,
    generator: &'a dyn Generator,
    gen_config: &'a GeneratorConfig,
    sink: Sink,
    /// Logged attempts still to be replayed, with their log line numbers.
    replay: std::vec::IntoIter<(usize, AttemptRecord)>,
    attempts: Vec<AttemptRecord>,
    history_global: PatchHistory,
}

/// Result of one attempt that the search loop needs.
struct Step {
    verdict: ValidationVerdict,
    entry: HistoryEntry,
    patched: Option<Program>,
    source: Option<String>,
}

impl<'a> Session<'a> {
    fn new(
        bug: &'a BugCase,
        config: &'a LprConfig,
        generator: &'a dyn Generator,
        gen_config: &'a GeneratorConfig,
        sink: Sink,
        replay: Vec<(usize, AttemptRecord)>,
    ) -> Self {
        Session {
            bug,
            config,
            generator,
            gen_config,
            sink,
            replay: replay.into_iter(),
            attempts: Vec::new(),
            history_global: PatchHistory::default(),
        }
    }

    fn trace(&self, program: &Program) -> Result<Vec<ExecutionTrace>, LprError> {
        Ok(trace_failing_tests(program, &self.bug.suite, &self.bug.target_function, self.config.limits, self.config.trace_caps)?)
    }

    fn run(mut self) -> Result<SessionSummary, LprError> {
        let budget = budget(self.config);
        let bug = self.bug;
        let original = &bug.program;
        let original_traces = self.trace(original)?;
        if original_traces.is_empty() {
            return Err(LprError::NotABug(self.bug.id.clone()));
        }

        let mut outcome = None;
        'rounds: for b in 0..self.config.breadth {
            if self.attempts.len() >= budget {
                break;
            }
            let history = self.history_global.clone();
            let step = self.attempt(b, 0, original, &original_traces, &history)?;
            match step.verdict {
                ValidationVerdict::AllPass => {
                    outcome = Some(self.success(step, b, 0));
                    break 'rounds;
                }
                ValidationVerdict::Discard => continue,
                ValidationVerdict::Refinable => {}
            }

            let mut history_round = PatchHistory::default();
            history_round.push(step.entry);
            let mut current = step.patched.expect("refinable patches apply");
            for d in 1..self.config.depth {
                if self.attempts.len() >= budget {
                    break 'rounds;
                }
                let traces = self.trace(&current)?;
                let step = self.attempt(b, d, &current, &traces, &history_round)?;
                match step.verdict {
                    ValidationVerdict::AllPass => {
                        outcome = Some(self.success(step, b, d));
                        break 'rounds;
                    }
                    ValidationVerdict::Discard => break,
                    ValidationVerdict::Refinable => {
                        history_round.push(step.entry);
                        current = step.patched.expect("refinable patches apply");
                    }
                }
            }
        }

        let outcome = outcome.unwrap_or(RepairOutcome::Unfixable { attempts_used: self.attempts.len() });
        if let Some((line, _)) = self.replay.next() {
            return Err(LprError::LogCorrupt { line, detail: "logged attempts continue past the end of the search".into() });
        }
        self.sink.session(&LogRecord::Outcome(OutcomeRecord { outcome: outcome.clone(), timestamp_ms: now_ms() }))?;
        Ok(SessionSummary { outcome, attempts: self.attempts })
    }

    fn success(&self, step: Step, b: u32, d: u32) -> RepairOutcome {
        RepairOutcome::Success {
            patch_source: step.source.expect("passing patches have source"),
            attempts_used: self.attempts.len(),
            b,
            d,
        }
    }

    fn attempt(
        &mut self,
        b: u32,
        d: u32,
        program: &Program,
        traces: &[ExecutionTrace],
        history: &PatchHistory,
    ) -> Result<Step, LprError> {
        let seq = self.attempts.len();
        let contexts = collect_call_context(program, traces, self.config.context_caps);
        let prompt = build_repair_prompt(
            self.bug,
            program,
            traces,
            &contexts,
            history,
            self.config.mode,
            &self.config.trace_caps,
            self.config.prompt_caps,
        )?;
        let hash = prompt_hash(&prompt, &self.gen_config.model_name, self.gen_config.temperature);
        let key = AttemptKey { bug_id: self.bug.id.clone(), b, d };

        let replayed = self.replay.next();
        let generated: Result<String, GenerationError> = match &replayed {
            Some((line, logged)) => {
                if (logged.seq, logged.b, logged.d) != (seq, b, d) || logged.prompt_hash != hash {
                    return Err(LprError::LogCorrupt {
                        line: *line,
                        detail: format!("replay diverged at attempt {seq} (b={b}, d={d})"),
                    });
                }
                match (&logged.output, &logged.generation_error) {
                    (Some(out), _) => Ok(out.clone()),
                    (None, Some(err)) => Err(err.clone()),
                    (None, None) => {
                        return Err(LprError::LogCorrupt { line: *line, detail: "attempt has neither output nor error".into() })
                    }
                }
            }
            None => {
                let started = Instant::now();
                let result = self.generator.generate(&prompt, &key);
                let raw = result.as_deref().unwrap_or_default();
                self.sink.generation(&GenerationRecord {
                    bug_id: self.bug.id.clone(),
                    attempt_index: seq,
                    b,
                    d,
                    prompt_hash: hash.clone(),
                    raw_output: raw.to_string(),
                    latency_ms: started.elapsed().as_millis() as u64,
                    prompt_chars: prompt.total_chars(),
                    completion_chars: raw.chars().count(),
                    error: result.as_ref().err().map(|e| e.to_string()),
                })?;
                result
            }
        };

        let mut record = AttemptRecord {
            seq,
            b,
            d,
            prompt_hash: hash,
            traced_program_hash: program_hash(program),
            patched_program_hash: None,
            output: generated.as_ref().ok().cloned(),
            generation_error: generated.as_ref().err().cloned(),
            extraction_error: None,
            patch_source: None,
            verdict: ValidationVerdict::Discard,
            passed: 0,
            failed: 0,
            result: String::new(),
            timestamp_ms: now_ms(),
        };
        let mut patched = None;
        match generated.map(|out| extract_patch(&out, &self.bug.target_function)) {
            Err(e) => record.result = format!("discarded: generation failed: {e}"),
            Ok(Err(e)) => {
                record.extraction_error = Some(e.to_string());
                record.result = format!("discarded: {e}");
            }
            Ok(Ok(patch)) => {
                let timeout = Duration::from_millis(self.config.attempt_timeout_ms);
                let result = validate_with_timeout(self.bug, &patch.function_source, self.config.limits, timeout);
                record.verdict = classify_with(&result, self.config.refinable_requires_partial_pass);
                (record.passed, record.failed) = result.counts();
                record.result = result.summary();
                if let Ok(p) = apply_patch(self.bug, &patch.function_source) {
                    record.patched_program_hash = Some(program_hash(&p));
                    patched = Some(p);
                }
                record.patch_source = Some(patch.function_source);
            }
        }

        if let Some((line, logged)) = &replayed {
            if logged.verdict != record.verdict || logged.patch_source != record.patch_source {
                return Err(LprError::LogCorrupt { line: *line, detail: format!("replayed attempt {seq} changed verdict") });
            }
            record.timestamp_ms = logged.timestamp_ms;
        } else {
            self.sink.session(&LogRecord::Attempt(record.clone()))?;
        }

        let entry = HistoryEntry {
            origin: Origin { b, d },
            source: record.patch_source.clone().unwrap_or_else(|| "(no function could be extracted)".into()),
            result_line: record.result.clone(),
        };
        self.history_global.push(entry.clone());
        let step = Step { verdict: record.verdict, entry, patched, source: record.patch_source.clone() };
        self.attempts.push(record);
        Ok(step)
    }
}

#[cfg(test)]
mod tests;
