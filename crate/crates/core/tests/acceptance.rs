//! End-to-end acceptance checks. Each test prints one `[PASS]`/`[FAIL]` line.

mod common;

use std::io::Write as _;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use serde::Deserialize;

use common::stub::{completion, Canned, Stub};
use common::*;
use tracefix::cli::report::{BugRun, ConfigEcho, RunReport, SweepRow};
use tracefix::cli::run_from;
use tracefix::corpus::BugCase;
use tracefix::minilang::{run_test, ExecLimits, RenderLimits, Value};
use tracefix::lpr::{self, read_session_log, LogPaths, LogRecord, LprConfig, RepairOutcome};
use tracefix::patchgen::{
    AttemptKey, GenerationError, Generator, GeneratorConfig, GeneratorKind, HttpGenerator, ScriptEntry, ScriptedGenerator,
    ScriptedPlan,
};
use tracefix::promptkit::{extract_patch, ExtractionError, PromptBundle, EXAMPLE_INPUT, EXAMPLE_OUTPUT, SYSTEM_TEXT};
use tracefix::tracer::{instrument, render_event, run_traced, AblationMode, TraceCaps, TraceEvent};
use tracefix::validator::RefMatch;

/// Runs `body`, reports the verdict on stderr past the test harness capture,
/// and re-raises any failure.
fn criterion(n: u32, name: &str, body: impl FnOnce()) {
    let start = Instant::now();
    let result = panic::catch_unwind(AssertUnwindSafe(body));
    let verdict = if result.is_ok() { "PASS" } else { "FAIL" };
    let line = format!("[{verdict}] criterion {n:2}: {name} ({:.2}s)\n", start.elapsed().as_secs_f64());
    let _ = std::io::stderr().write_all(line.as_bytes());
    if let Err(e) = result {
        panic::resume_unwind(e);
    }
}

fn cfg(breadth: u32, depth: u32) -> LprConfig {
    LprConfig { breadth, depth, ..LprConfig::default() }
}

fn run_plan(bug: &BugCase, config: &LprConfig, plan: &ScriptedPlan, logs: LogPaths) -> lpr::SessionSummary {
    let g = ScriptedGenerator::new(plan.clone());
    lpr::repair_with(bug, config, &g, &GeneratorConfig::default(), logs)
        .unwrap_or_else(|e| panic!("{}: {e}", bug.id))
}

#[test]
fn c01_budget_fidelity() {
    criterion(1, "budget fidelity: always-refinable generator exhausts B*D = 35", || {
        let cases = corpus();
        assert!(cases.len() >= 12);
        let plan = echo_plan(&cases);
        let start = Instant::now();
        for bug in &cases {
            let s = run_plan(bug, &cfg(7, 5), &plan, LogPaths::default());
            assert_eq!(s.outcome, RepairOutcome::Unfixable { attempts_used: 35 }, "{}", bug.id);
            assert_eq!(s.attempts.len(), 35);
            // Seven rounds of one fresh candidate plus four refinements.
            for b in 0..7 {
                let ds: Vec<u32> = s.attempts.iter().filter(|a| a.b == b).map(|a| a.d).collect();
                assert_eq!(ds, vec![0, 1, 2, 3, 4], "{} round {b}", bug.id);
            }
        }
        assert!(start.elapsed() < Duration::from_secs(60), "took {:?}", start.elapsed());
    });
}

#[test]
fn c02_breadth_only_exhaustion() {
    criterion(2, "breadth-only exhaustion: compile errors use exactly B attempts", || {
        let cases = corpus();
        let plan = compile_error_plan(&cases);
        for (b, d) in [(7, 5), (3, 4), (1, 1)] {
            for bug in &cases {
                let s = run_plan(bug, &cfg(b, d), &plan, LogPaths::default());
                assert_eq!(s.outcome, RepairOutcome::Unfixable { attempts_used: b as usize }, "{} B={b} D={d}", bug.id);
                assert!(s.attempts.iter().all(|a| a.d == 0), "{}: depth entered", bug.id);
            }
        }
    });
}

#[test]
fn c03_non_interference() {
    criterion(3, "non-interference: instrumented and plain outcomes are identical", || {
        let start = Instant::now();
        let limits = ExecLimits::default();
        let mut pairs = 0;
        for bug in corpus() {
            let mut programs = vec![bug.program.clone()];
            if let Some(fix) = bug.reference_fix() {
                programs.push(tracefix::validator::apply_patch(&bug, fix).unwrap());
            }
            for program in &programs {
                let instr = instrument(program, &bug.target_function).unwrap();
                for case in &bug.suite.cases {
                    let plain = run_test(program, case, limits);
                    for caps in [TraceCaps::default(), TraceCaps::unbounded(), TraceCaps { max_events: 2, ..TraceCaps::default() }] {
                        let (traced, _) = run_traced(&instr, case, limits, caps);
                        assert_eq!(plain, traced, "{} / {}", bug.id, case.name());
                    }
                    pairs += 1;
                }
            }
        }
        assert!(pairs > 40);
        assert!(start.elapsed() < Duration::from_secs(30));
    });
}

#[test]
fn c04_end_to_end_repair() {
    criterion(4, "end-to-end: fix at (2,0) takes 3 attempts; partial then fix takes 2", || {
        let cases = corpus();
        let plan = allfix_plan(&cases, 2, 0);
        for bug in &cases {
            let s = run_plan(bug, &cfg(7, 5), &plan, LogPaths::default());
            match &s.outcome {
                RepairOutcome::Success { attempts_used, b, d, patch_source } => {
                    assert_eq!((*attempts_used, *b, *d), (3, 2, 0), "{}", bug.id);
                    assert_eq!(tracefix::validator::matches_reference(bug, patch_source), RefMatch::Yes);
                }
                other => panic!("{}: {other:?}", bug.id),
            }
        }

        let with_partial: Vec<&BugCase> = cases.iter().filter(|c| c.partial_fix().is_some()).collect();
        assert!(with_partial.len() >= 3);
        let dir = tempfile::tempdir().unwrap();
        for bug in with_partial {
            let plan = ScriptedPlan {
                default: None,
                entries: vec![
                    ScriptEntry::exact(&bug.id, 0, 0, marked(bug.partial_fix().unwrap())),
                    ScriptEntry::exact(&bug.id, 0, 1, marked(bug.reference_fix().unwrap())),
                ],
            };
            let log = dir.path().join(format!("{}.jsonl", bug.id));
            let s = run_plan(bug, &cfg(7, 5), &plan, LogPaths { session: Some(&log), generation: None });
            assert!(matches!(s.outcome, RepairOutcome::Success { attempts_used: 2, b: 0, d: 1, .. }), "{}: {:?}", bug.id, s.outcome);

            let attempts: Vec<_> = read_session_log(&log)
                .unwrap()
                .into_iter()
                .filter_map(|r| match r {
                    LogRecord::Attempt(a) => Some(a),
                    _ => None,
                })
                .collect();
            let (first, second) = (&attempts[0], &attempts[1]);
            assert_eq!(first.verdict, tracefix::validator::ValidationVerdict::Refinable);
            // The depth prompt was built from traces of the partially patched program.
            assert_eq!(Some(&second.traced_program_hash), first.patched_program_hash.as_ref(), "{}", bug.id);
            assert_ne!(second.traced_program_hash, first.traced_program_hash, "{}", bug.id);
            assert_ne!(second.prompt_hash, first.prompt_hash);
        }
    });
}

fn ablation_run(cases: &[BugCase], plan: &ScriptedPlan, mode: AblationMode) -> RunReport {
    let config = LprConfig { mode, ..cfg(2, 1) };
    let runs = cases
        .iter()
        .map(|bug| {
            let s = run_plan(bug, &config, plan, LogPaths::default());
            let refmatch = match &s.outcome {
                RepairOutcome::Success { patch_source, .. } => tracefix::validator::matches_reference(bug, patch_source),
                RepairOutcome::Unfixable { .. } => RefMatch::Unknown,
            };
            BugRun::from_outcome(&bug.id, &s.outcome, refmatch)
        })
        .collect();
    let gen = GeneratorConfig::default();
    RunReport::new(
        runs,
        ConfigEcho {
            breadth: config.breadth,
            depth: config.depth,
            max_patch_attempts: lpr::budget(&config),
            mode,
            attempt_timeout_ms: config.attempt_timeout_ms,
            refinable_requires_partial_pass: false,
            generator: GeneratorKind::Scripted,
            model: gen.model_name,
            temperature: gen.temperature,
            script: Some("fixtures/ablation.json".into()),
            endpoint: None,
            max_steps: config.limits.max_steps,
            jobs: 1,
        },
    )
}

#[test]
fn c05_ablation_parity() {
    criterion(5, "ablation: full tracing fixes at least as much as every ablated mode", || {
        let cases = corpus();
        let plan = ablation_plan(&cases);
        let modes = [
            AblationMode::Full,
            AblationMode::WithoutLocalVariables,
            AblationMode::WithoutControlFlow,
            AblationMode::WithoutMethodCall,
            AblationMode::ExceptionOnly,
            AblationMode::Pure,
        ];
        let rates: Vec<(AblationMode, f64, usize)> = modes
            .iter()
            .map(|&m| {
                let r = ablation_run(&cases, &plan, m);
                assert_eq!(r.totals.fix_rate, r.totals.plausible_count as f64 / r.totals.case_count as f64);
                (m, r.totals.fix_rate, r.totals.plausible_count)
            })
            .collect();
        for (m, rate, n) in &rates {
            let _ = std::io::stderr().write_all(format!("      {:24} fix rate {rate:.3} ({n}/{})\n", m.as_str(), cases.len()).as_bytes());
        }
        let full = rates[0].1;
        for (m, rate, _) in &rates[1..] {
            assert!(full >= *rate, "{m} ({rate}) beats full ({full})");
        }
        assert!(full > rates[5].1, "full tracing should beat the trace-free prompt");
    });
}

#[derive(Deserialize)]
struct Sample {
    name: String,
    target: String,
    output: String,
    expect: Expect,
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum Expect {
    Function(String),
    Error(String),
}

fn error_kind(e: &ExtractionError) -> &'static str {
    match e {
        ExtractionError::NoMarker => "no_marker",
        ExtractionError::MultipleMarkers(_) => "multiple_markers",
        ExtractionError::NoParse(_) => "no_parse",
        ExtractionError::WrongName { .. } => "wrong_name",
    }
}

#[test]
fn c06_extraction_robustness() {
    criterion(6, "extraction: 10/10 model-output samples handled", || {
        let text = std::fs::read_to_string(repo_path("fixtures/extraction_samples.json")).unwrap();
        let samples: Vec<Sample> = serde_json::from_str(&text).unwrap();
        assert_eq!(samples.len(), 10);
        let mut correct = 0;
        for s in &samples {
            let got = extract_patch(&s.output, &s.target);
            let ok = match (&s.expect, &got) {
                (Expect::Function(src), Ok(p)) => &p.function_source == src,
                (Expect::Error(kind), Err(e)) => error_kind(e) == kind,
                _ => false,
            };
            assert!(ok, "sample {}: got {got:?}", s.name);
            correct += 1;
        }
        assert_eq!(correct, 10);
    });
}

#[test]
fn c07_trace_rendering_golden() {
    criterion(7, "trace rendering: header buffer variable line is byte-exact", || {
        let header: Vec<Value> = "test header".bytes().map(|b| Value::Int(b as i64)).collect();
        let value_repr = Value::Array(header).render(RenderLimits { max_elements: 3, max_chars: 80 });
        let event = TraceEvent::VarWrite { line: 192, name: "headerBuf".into(), value_repr };
        assert_eq!(render_event(&event), "Runtime context at line 192 -> Local Variable headerBuf = [116, 101, 115, ...]");
    });
}

fn bundle() -> PromptBundle {
    PromptBundle {
        system_text: SYSTEM_TEXT.into(),
        example_input: EXAMPLE_INPUT.into(),
        example_output: EXAMPLE_OUTPUT.into(),
        debug_info: "dbg".into(),
        mode: AblationMode::Full,
        token_estimate: 0,
    }
}

fn http(stub: &Stub, retries: u32, timeout_ms: u64) -> HttpGenerator {
    let cfg = GeneratorConfig {
        max_retries: retries,
        request_timeout_ms: timeout_ms,
        backoff_base_ms: 5,
        ..GeneratorConfig::http(&stub.url)
    };
    HttpGenerator::new(cfg, "test-key".into())
}

#[test]
fn c08_http_generator_against_stub() {
    criterion(8, "http generator: success, 429 retry, timeout and malformed responses", || {
        let start = Instant::now();
        let key = AttemptKey { bug_id: "sum-inclusive".into(), b: 0, d: 0 };

        let stub = Stub::start(vec![Canned::ok(completion("hello"))]);
        assert_eq!(http(&stub, 0, 5_000).generate(&bundle(), &key).unwrap(), "hello");
        assert!(stub.url.starts_with("http://127.0.0.1:"));

        let stub = Stub::start(vec![Canned::status(429), Canned::ok(completion("after retry"))]);
        assert_eq!(http(&stub, 3, 5_000).generate(&bundle(), &key).unwrap(), "after retry");
        assert_eq!(stub.hits(), 2);

        let stub = Stub::start(vec![Canned::ok(completion("late")).slow(2_000)]);
        let t = Instant::now();
        assert_eq!(http(&stub, 3, 150).generate(&bundle(), &key).unwrap_err(), GenerationError::Timeout);
        assert!(t.elapsed() < Duration::from_millis(1_500));
        assert_eq!(stub.hits(), 1);

        for body in ["not json", r#"{"choices": []}"#, r#"{"choices": [{"message": {"content": 7}}]}"#] {
            let stub = Stub::start(vec![Canned::ok(body)]);
            let err = http(&stub, 3, 5_000).generate(&bundle(), &key).unwrap_err();
            assert!(matches!(err, GenerationError::MalformedResponse { .. }), "{body}: {err:?}");
            assert_eq!(stub.hits(), 1, "malformed responses are not retried");
        }

        // A whole repair session driven over HTTP.
        let bug = corpus().into_iter().find(|c| c.id == "sum-inclusive").unwrap();
        let stub = Stub::start(vec![Canned::ok(completion(&marked(bug.reference_fix().unwrap())))]);
        let g = http(&stub, 0, 5_000);
        let s = lpr::repair_with(&bug, &cfg(7, 5), &g, &GeneratorConfig::http(&stub.url), LogPaths::default()).unwrap();
        assert!(matches!(s.outcome, RepairOutcome::Success { attempts_used: 1, .. }));

        assert!(start.elapsed() < Duration::from_secs(10));
    });
}

#[test]
fn c09_resume_determinism() {
    criterion(9, "resume: interrupted then resumed log equals an uninterrupted one", || {
        let dir = tempfile::tempdir().unwrap();
        let cases = corpus();
        // Refinable echoes until the fix arrives late in the second round.
        let mut plan = echo_plan(&cases);
        for c in &cases {
            plan.entries.insert(0, ScriptEntry::exact(&c.id, 1, 3, marked(c.reference_fix().unwrap())));
        }
        let config = cfg(4, 5);
        for bug in &cases {
            let full_log = dir.path().join(format!("{}-full.jsonl", bug.id));
            let full = run_plan(bug, &config, &plan, LogPaths { session: Some(&full_log), generation: None });
            assert!(matches!(full.outcome, RepairOutcome::Success { attempts_used: 9, .. }), "{}", bug.id);

            let text = std::fs::read_to_string(&full_log).unwrap();
            for keep in [1, 4, 7] {
                let cut: String = text.lines().take(keep).map(|l| format!("{l}\n")).collect();
                let part_log = dir.path().join(format!("{}-{keep}.jsonl", bug.id));
                std::fs::write(&part_log, cut).unwrap();
                let g = ScriptedGenerator::new(plan.clone());
                let resumed =
                    lpr::resume(bug, &config, &g, &GeneratorConfig::default(), LogPaths { session: Some(&part_log), generation: None })
                        .unwrap();
                assert_eq!(resumed.outcome, full.outcome);
                let resumed_text = std::fs::read_to_string(&part_log).unwrap();
                assert_eq!(strip_timestamps(&resumed_text), strip_timestamps(&text), "{} cut at {keep}", bug.id);
            }
        }
    });
}

fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["tracefix"];
    argv.extend_from_slice(args);
    let code = run_from(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn c10_sweep_report() {
    criterion(10, "sweep report: max-attempt columns equal B*D for every cell", || {
        let dir = tempfile::tempdir().unwrap();
        let cases = corpus();
        let script = dir.path().join("echo.json");
        std::fs::write(&script, plan_json(&echo_plan(&cases))).unwrap();
        let corpus_root = repo_path("corpus");
        let mut grid = Vec::new();
        for b in [1u32, 3, 5, 7] {
            let out = dir.path().join(format!("runs/b{b}-d3"));
            let (code, _, err) = cli(&[
                "repair",
                corpus_root.to_str().unwrap(),
                "--breadth",
                &b.to_string(),
                "--depth",
                "3",
                "--script",
                script.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--jobs",
                "4",
            ]);
            assert_eq!(code, 0, "{err}");
            grid.push(b * 3);
        }
        let runs = dir.path().join("runs");
        let (code, stdout, err) = cli(&["report", runs.to_str().unwrap(), "--sweep", "--json"]);
        assert_eq!(code, 0, "{err}");
        let mut rows: Vec<SweepRow> = serde_json::from_str(&stdout).unwrap();
        rows.sort_by_key(|r| r.breadth);
        assert_eq!(rows.len(), 4);
        for (row, expected) in rows.iter().zip(&grid) {
            assert_eq!(row.max_patch_attempts, *expected as usize);
            assert_eq!(row.max_attempts_used, *expected as usize);
            assert_eq!(row.case_count, cases.len());
        }
        assert!(rows.windows(2).all(|w| w[0].max_attempts_used <= w[1].max_attempts_used));

        let (code, table, _) = cli(&["report", runs.to_str().unwrap(), "--sweep"]);
        assert_eq!(code, 0);
        for b in [1, 3, 5, 7] {
            assert!(table.contains(&format!("| full | {b} | 3 | {} |", b * 3)), "{table}");
        }
    });
}
