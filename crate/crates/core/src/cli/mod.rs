//! Command-line front end: `trace`, `repair`, `report` and `check`.

pub mod report;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::corpus::{check_case, load_corpus, BugCase, METADATA_FILE};
use crate::lpr::{self, LogPaths, LprConfig};
use crate::minilang::ExecLimits;
use crate::patchgen::{build_generator, GeneratorConfig, GeneratorKind, Generator};
use crate::tracer::{render_traces, trace_failing_tests, trace_jsonl, AblationMode, TraceCaps};
use crate::validator::matches_reference;

use report::{load_reports, summary_table, sweep_rows, sweep_table, BugRun, ConfigEcho, RunReport, REPORT_JSON, REPORT_MD};

pub const SESSION_LOG: &str = "session.jsonl";
pub const GENERATION_LOG: &str = "generation.jsonl";

#[derive(Parser, Debug)]
#[command(name = "tracefix", version, about = "Trace-driven automated repair for .mini programs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Trace the failing tests of one bug and print the prompt-ready rendering.
    Trace(TraceArgs),
    /// Run the repair loop over one bug directory or a whole corpus.
    Repair(RepairArgs),
    /// Summarize one or more result directories.
    Report(ReportArgs),
    /// Verify that every corpus case fails as shipped and its fix passes.
    Check(CheckArgs),
}

#[derive(Args, Debug)]
pub struct TraceArgs {
    pub bug_dir: PathBuf,
    #[arg(long, default_value = "full", value_parser = parse_mode)]
    pub mode: AblationMode,
    /// Write the rendered text here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "trace.jsonl")]
    pub jsonl: PathBuf,
    #[arg(long, default_value_t = 300)]
    pub max_events: usize,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum GeneratorArg {
    Scripted,
    Http,
}

#[derive(Args, Debug)]
pub struct RepairArgs {
    /// A bug directory (containing bug.json) or a corpus root.
    pub path: PathBuf,
    #[arg(long, default_value_t = 7, value_parser = clap::value_parser!(u32).range(1..))]
    pub breadth: u32,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
    pub depth: u32,
    #[arg(long, value_enum, default_value = "scripted")]
    pub generator: GeneratorArg,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub script: Option<PathBuf>,
    #[arg(long, default_value = "gpt-4o")]
    pub model: String,
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    #[arg(long, default_value = "full", value_parser = parse_mode)]
    pub mode: AblationMode,
    /// Wall-clock limit per validation.
    #[arg(long, default_value_t = 60_000)]
    pub timeout_ms: u64,
    #[arg(long, default_value_t = 120_000)]
    pub request_timeout_ms: u64,
    #[arg(long, default_value_t = 3)]
    pub max_retries: u32,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: u64,
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
    /// Continue interrupted sessions from their logs.
    #[arg(long)]
    pub resume: bool,
    /// Discard patches that pass no test instead of refining them.
    #[arg(long)]
    pub refinable_requires_partial_pass: bool,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_steps: u64,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(required = true)]
    pub dirs: Vec<PathBuf>,
    /// Aggregate runs per (mode, breadth, depth).
    #[arg(long)]
    pub sweep: bool,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    pub root: PathBuf,
}

fn parse_mode(s: &str) -> Result<AblationMode, String> {
    s.parse()
}

/// Parses `args` and runs the command. Returns the process exit code.
pub fn run_from<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 { write!(stdout, "{text}") } else { write!(stderr, "{text}") };
            return code;
        }
    };
    let result = match cli.command {
        Command::Trace(a) => cmd_trace(&a, stdout, stderr),
        Command::Repair(a) => cmd_repair(&a, stdout, stderr),
        Command::Report(a) => cmd_report(&a, stdout),
        Command::Check(a) => cmd_check(&a, stdout),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            let _ = writeln!(stderr, "error: {msg}");
            1
        }
    }
}

type CmdResult = Result<i32, String>;

fn write_file(path: &Path, contents: &str) -> Result<(), String> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| format!("cannot create {}: {e}", parent.display()))?;
    }
    fs::write(path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

pub fn cmd_trace(a: &TraceArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CmdResult {
    let bug = BugCase::load(&a.bug_dir).map_err(|e| e.to_string())?;
    let caps = TraceCaps { max_events: a.max_events, ..TraceCaps::default() };
    let traces = trace_failing_tests(&bug.program, &bug.suite, &bug.target_function, ExecLimits::default(), caps)
        .map_err(|e| e.to_string())?;
    let jsonl: String = traces.iter().map(trace_jsonl).collect();
    write_file(&a.jsonl, &jsonl)?;
    if traces.is_empty() {
        let _ = writeln!(stderr, "note: every test of `{}` passes; nothing to trace", bug.id);
    }
    let text = render_traces(&traces, &caps, a.mode);
    match &a.out {
        Some(p) => write_file(p, &text)?,
        None => {
            let _ = write!(stdout, "{text}");
        }
    }
    Ok(0)
}

/// Loads either one bug directory or every bug under a corpus root.
pub fn load_targets(path: &Path) -> Result<Vec<BugCase>, String> {
    if path.join(METADATA_FILE).is_file() {
        BugCase::load(path).map(|b| vec![b]).map_err(|e| e.to_string())
    } else {
        load_corpus(path).map_err(|e| e.to_string())
    }
}

fn generator_config(a: &RepairArgs) -> GeneratorConfig {
    GeneratorConfig {
        kind: match a.generator {
            GeneratorArg::Scripted => GeneratorKind::Scripted,
            GeneratorArg::Http => GeneratorKind::HttpChat,
        },
        endpoint_url: a.endpoint.clone(),
        model_name: a.model.clone(),
        temperature: a.temperature,
        request_timeout_ms: a.request_timeout_ms,
        max_retries: a.max_retries,
        script_path: a.script.clone(),
        ..GeneratorConfig::default()
    }
}

fn lpr_config(a: &RepairArgs) -> LprConfig {
    LprConfig {
        breadth: a.breadth,
        depth: a.depth,
        attempt_timeout_ms: a.timeout_ms,
        refinable_requires_partial_pass: a.refinable_requires_partial_pass,
        mode: a.mode,
        limits: ExecLimits { max_steps: a.max_steps, ..ExecLimits::default() },
        ..LprConfig::default()
    }
}

/// Runs one bug's session, writing its logs under `out/<id>/`.
pub fn repair_one(
    bug: &BugCase,
    config: &LprConfig,
    generator: &dyn Generator,
    gen_config: &GeneratorConfig,
    out: &Path,
    resume: bool,
) -> BugRun {
    let dir = out.join(&bug.id);
    if let Err(e) = fs::create_dir_all(&dir) {
        return BugRun::failed(&bug.id, format!("cannot create {}: {e}", dir.display()));
    }
    let session = dir.join(SESSION_LOG);
    let generation = dir.join(GENERATION_LOG);
    let logs = LogPaths { session: Some(&session), generation: Some(&generation) };
    let result = if resume && session.is_file() {
        lpr::resume(bug, config, generator, gen_config, logs)
    } else {
        lpr::repair_with(bug, config, generator, gen_config, logs)
    };
    match result {
        Ok(summary) => {
            let refmatch = match &summary.outcome {
                lpr::RepairOutcome::Success { patch_source, .. } => matches_reference(bug, patch_source),
                lpr::RepairOutcome::Unfixable { .. } => crate::validator::RefMatch::Unknown,
            };
            BugRun::from_outcome(&bug.id, &summary.outcome, refmatch)
        }
        Err(e) => BugRun::failed(&bug.id, e.to_string()),
    }
}

pub fn cmd_repair(a: &RepairArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CmdResult {
    let gen_config = generator_config(a);
    let config = lpr_config(a);
    config.validate().map_err(|e| e.to_string())?;
    let generator = build_generator(&gen_config).map_err(|e| e.to_string())?;
    let bugs = load_targets(&a.path)?;

    let pool = rayon::ThreadPoolBuilder::new().num_threads(a.jobs as usize).build().map_err(|e| e.to_string())?;
    let runs: Vec<BugRun> = pool.install(|| {
        bugs.par_iter()
            .map(|bug| repair_one(bug, &config, generator.as_ref(), &gen_config, &a.out, a.resume))
            .collect()
    });

    let echo = ConfigEcho {
        breadth: config.breadth,
        depth: config.depth,
        max_patch_attempts: lpr::budget(&config),
        mode: config.mode,
        attempt_timeout_ms: config.attempt_timeout_ms,
        refinable_requires_partial_pass: config.refinable_requires_partial_pass,
        generator: gen_config.kind,
        model: gen_config.model_name.clone(),
        temperature: gen_config.temperature,
        script: gen_config.script_path.as_ref().map(|p| p.display().to_string()),
        endpoint: gen_config.endpoint_url.clone(),
        max_steps: config.limits.max_steps,
        jobs: a.jobs as usize,
    };
    let report = RunReport::new(runs, echo);
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_file(&a.out.join(REPORT_JSON), &format!("{json}\n"))?;
    write_file(&a.out.join(REPORT_MD), &report.to_markdown())?;
    let _ = write!(stdout, "{}", report.to_markdown());
    for r in report.per_bug.iter().filter(|r| r.error.is_some()) {
        let _ = writeln!(stderr, "error: {}: {}", r.id, r.error.as_deref().unwrap_or_default());
    }
    Ok(if report.totals.error_count > 0 { 1 } else { 0 })
}

pub fn cmd_report(a: &ReportArgs, stdout: &mut dyn Write) -> CmdResult {
    let reports = load_reports(&a.dirs).map_err(|e| e.to_string())?;
    if a.sweep {
        let rows = sweep_rows(&reports);
        if a.json {
            let _ = writeln!(stdout, "{}", serde_json::to_string_pretty(&rows).expect("rows serialize"));
        } else {
            let _ = write!(stdout, "{}", sweep_table(&rows));
        }
    } else if a.json {
        let all: Vec<&RunReport> = reports.iter().map(|(_, r)| r).collect();
        let _ = writeln!(stdout, "{}", serde_json::to_string_pretty(&all).expect("reports serialize"));
    } else {
        let _ = write!(stdout, "{}", summary_table(&reports));
    }
    Ok(0)
}

pub fn cmd_check(a: &CheckArgs, stdout: &mut dyn Write) -> CmdResult {
    let bugs = load_targets(&a.root)?;
    let mut bad = 0;
    for bug in &bugs {
        let r = check_case(bug, ExecLimits::default());
        let status = if r.ok() { "ok" } else { "FAIL" };
        if !r.ok() {
            bad += 1;
        }
        let fix = match r.fix_passes {
            Some(true) => "fix passes",
            Some(false) => "fix FAILS",
            None => "no fix",
        };
        let _ = writeln!(
            stdout,
            "{status:4} {:28} failing: {} | {fix}{}",
            r.id,
            r.failing_tests.join(", "),
            match r.partial_is_partial {
                Some(true) => " | partial ok",
                Some(false) => " | partial BAD",
                None => "",
            }
        );
    }
    let _ = writeln!(stdout, "{} case(s), {} problem(s)", bugs.len(), bad);
    Ok(if bad > 0 { 1 } else { 0 })
}
