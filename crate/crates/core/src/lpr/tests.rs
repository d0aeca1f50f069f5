use std::sync::Mutex;

use super::*;
use crate::patchgen::{ScriptEntry, ScriptedGenerator, ScriptedPlan};
use crate::promptkit::PromptBundle;

const PROGRAM: &str = "fn clamp(x, lo, hi) {\n    if (x < lo) {\n        return hi;\n    }\n    if (x > hi) {\n        return lo;\n    }\n    return x;\n}\n";
const TESTS: &str = "fn test_mid() { assert_eq(clamp(5, 0, 10), 5); }\n\
fn test_low() { assert_eq(clamp(-3, 0, 10), 0); }\n\
fn test_high() { assert_eq(clamp(42, 0, 10), 10); }\n";
const FIX: &str = "// FIXED_FUNCTION\nfn clamp(x, lo, hi) {\n    if (x < lo) {\n        return lo;\n    }\n    if (x > hi) {\n        return hi;\n    }\n    return x;\n}\n";
const PARTIAL: &str = "// FIXED_FUNCTION\nfn clamp(x, lo, hi) {\n    if (x < lo) {\n        return lo;\n    }\n    if (x > hi) {\n        return lo;\n    }\n    return x;\n}\n";
const REFINABLE: &str = "// FIXED_FUNCTION\nfn clamp(x, lo, hi) {\n    return x;\n}\n";
const COMPILE_ERROR: &str = "// FIXED_FUNCTION\nfn clamp(x, lo, hi) {\n    return undefined_helper(x);\n}\n";

fn bug() -> BugCase {
    BugCase::from_sources("clamp", "clamp", PROGRAM, TESTS, None).unwrap()
}

/// Scripted generator that also remembers every prompt it was shown.
struct Recording {
    inner: ScriptedGenerator,
    seen: Mutex<Vec<(AttemptKey, String)>>,
}

impl Recording {
    fn new(plan: ScriptedPlan) -> Self {
        Recording { inner: ScriptedGenerator::new(plan), seen: Mutex::new(Vec::new()) }
    }

    fn keys(&self) -> Vec<(u32, u32)> {
        self.seen.lock().unwrap().iter().map(|(k, _)| (k.b, k.d)).collect()
    }

    fn prompt(&self, i: usize) -> String {
        self.seen.lock().unwrap()[i].1.clone()
    }
}

impl Generator for Recording {
    fn generate(&self, prompt: &PromptBundle, key: &AttemptKey) -> Result<String, GenerationError> {
        self.seen.lock().unwrap().push((key.clone(), prompt.debug_info.clone()));
        self.inner.generate(prompt, key)
    }
}

fn always(output: &str) -> ScriptedPlan {
    ScriptedPlan { default: Some(output.into()), entries: vec![] }
}

fn cfg(breadth: u32, depth: u32) -> LprConfig {
    LprConfig { breadth, depth, ..LprConfig::default() }
}

fn run(plan: ScriptedPlan, config: &LprConfig) -> (SessionSummary, Recording) {
    let g = Recording::new(plan);
    let s = repair_with(&bug(), config, &g, &GeneratorConfig::default(), LogPaths::default()).unwrap();
    (s, g)
}

#[test]
fn budget_is_breadth_times_depth() {
    assert_eq!(budget(&cfg(7, 5)), 35);
    assert_eq!(budget(&cfg(1, 1)), 1);
    assert_eq!(budget(&cfg(3, 3)), 9);
    assert_eq!(budget(&LprConfig::default()), 35);
}

#[test]
fn invalid_config_is_rejected() {
    let g = Recording::new(always(FIX));
    for c in [cfg(0, 5), cfg(7, 0)] {
        let e = repair_with(&bug(), &c, &g, &GeneratorConfig::default(), LogPaths::default()).unwrap_err();
        assert!(matches!(e, LprError::InvalidConfig(_)));
    }
}

#[test]
fn immediate_fix() {
    let (s, g) = run(always(FIX), &cfg(7, 5));
    assert_eq!(s.outcome, RepairOutcome::Success { patch_source: FIX["// FIXED_FUNCTION\n".len()..].into(), attempts_used: 1, b: 0, d: 0 });
    assert_eq!(g.keys(), [(0, 0)]);
}

#[test]
fn compile_errors_never_enter_depth() {
    let (s, g) = run(always(COMPILE_ERROR), &cfg(7, 5));
    assert_eq!(s.outcome, RepairOutcome::Unfixable { attempts_used: 7 });
    assert_eq!(g.keys(), (0..7).map(|b| (b, 0)).collect::<Vec<_>>());
    assert!(s.attempts.iter().all(|a| a.verdict == ValidationVerdict::Discard && a.result.starts_with("compile error")));
}

#[test]
fn refinable_failures_exhaust_the_full_budget() {
    let (s, g) = run(always(REFINABLE), &cfg(7, 5));
    assert_eq!(s.outcome, RepairOutcome::Unfixable { attempts_used: 35 });
    let expected: Vec<(u32, u32)> = (0..7).flat_map(|b| (0..5).map(move |d| (b, d))).collect();
    assert_eq!(g.keys(), expected);
}

#[test]
fn unusable_outputs_count_as_discarded_attempts() {
    let (s, _) = run(always("I cannot help with that."), &cfg(3, 4));
    assert_eq!(s.outcome.attempts_used(), 3);
    assert!(s.attempts.iter().all(|a| a.extraction_error.is_some() && a.patch_source.is_none()));

    // A script miss behaves like a generator failure.
    let (s, _) = run(ScriptedPlan::default(), &cfg(2, 2));
    assert_eq!(s.outcome, RepairOutcome::Unfixable { attempts_used: 2 });
    assert!(matches!(s.attempts[0].generation_error, Some(GenerationError::ScriptMiss { .. })));
}

#[test]
fn mixed_sequence_stops_at_first_success() {
    let plan = ScriptedPlan {
        default: Some(REFINABLE.into()),
        entries: vec![
            ScriptEntry::exact("clamp", 1, 0, COMPILE_ERROR),
            ScriptEntry::exact("clamp", 2, 1, FIX),
        ],
    };
    let (s, g) = run(plan, &cfg(3, 3));
    assert_eq!(g.keys(), [(0, 0), (0, 1), (0, 2), (1, 0), (2, 0), (2, 1)]);
    assert!(matches!(s.outcome, RepairOutcome::Success { attempts_used: 6, b: 2, d: 1, .. }));
}

#[test]
fn partial_then_full_fix_in_depth() {
    let plan = ScriptedPlan {
        default: None,
        entries: vec![ScriptEntry::exact("clamp", 0, 0, PARTIAL), ScriptEntry::exact("clamp", 0, 1, FIX)],
    };
    let (s, g) = run(plan, &cfg(7, 5));
    assert!(matches!(s.outcome, RepairOutcome::Success { attempts_used: 2, b: 0, d: 1, .. }));
    assert_eq!((s.attempts[0].passed, s.attempts[0].failed), (2, 1));

    // The depth prompt is built from the partially patched program.
    let original = program_hash(&bug().program);
    assert_eq!(s.attempts[0].traced_program_hash, original);
    assert_eq!(Some(&s.attempts[1].traced_program_hash), s.attempts[0].patched_program_hash.as_ref());
    assert_ne!(s.attempts[1].traced_program_hash, original);
    let depth_prompt = g.prompt(1);
    assert!(depth_prompt.contains("Test `test_high` failed"));
    assert!(!depth_prompt.contains("Test `test_low` failed"));
    assert!(depth_prompt.contains("Attempt 1 (round 0, step 0)"));
}

#[test]
fn zero_pass_switch_gates_depth_entry() {
    let crash_all = "// FIXED_FUNCTION\nfn clamp(x, lo, hi) {\n    return x / 0;\n}\n";
    let (s, _) = run(always(crash_all), &cfg(2, 3));
    assert_eq!(s.outcome.attempts_used(), 6);
    let strict = LprConfig { refinable_requires_partial_pass: true, ..cfg(2, 3) };
    let (s, g) = run(always(crash_all), &strict);
    assert_eq!(s.outcome.attempts_used(), 2);
    assert_eq!(g.keys(), [(0, 0), (1, 0)]);
}

#[test]
fn histories_per_round_and_global() {
    let (_, g) = run(always(REFINABLE), &cfg(3, 3));
    // Round 0: first breadth prompt has no history; depth prompts see the round.
    assert!(!g.prompt(0).contains("### Previous attempts"));
    assert_eq!(g.prompt(1).matches("\nAttempt ").count() + g.prompt(1).starts_with("Attempt ") as usize, 1);
    assert!(g.prompt(2).contains("Attempt 2 (round 0, step 1)"));
    // Round 1 breadth prompt lists all three earlier attempts.
    let p3 = g.prompt(3);
    assert!(p3.contains("Attempt 3 (round 0, step 2)") && !p3.contains("Attempt 4"));
    // Round 1 depth prompt restarts from {p0 of round 1}.
    let p4 = g.prompt(4);
    assert!(p4.contains("Attempt 1 (round 1, step 0)") && !p4.contains("round 0"));
    // Breadth prompts trace the original program.
    assert!(g.prompt(3).contains("Test `test_low` failed: AssertionFailure at line 2: expected:<0> but was:<10>"));
}

#[test]
fn not_a_bug() {
    let fixed = BugCase::from_sources("ok", "clamp", &FIX["// FIXED_FUNCTION\n".len()..], TESTS, None).unwrap();
    let g = Recording::new(always(FIX));
    let e = repair_with(&fixed, &cfg(1, 1), &g, &GeneratorConfig::default(), LogPaths::default()).unwrap_err();
    assert!(matches!(e, LprError::NotABug(_)));
}

fn strip_timestamps(text: &str) -> String {
    text.lines()
        .map(|l| {
            let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
            v.as_object_mut().unwrap().remove("timestamp_ms");
            v.to_string()
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn mixed_plan() -> ScriptedPlan {
    ScriptedPlan {
        default: Some(REFINABLE.into()),
        entries: vec![
            ScriptEntry::exact("clamp", 1, 0, "no marker here"),
            ScriptEntry::exact("clamp", 2, 0, PARTIAL),
            ScriptEntry::exact("clamp", 2, 2, FIX),
        ],
    }
}

#[test]
fn session_log_shape() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("session.jsonl");
    let gen_path = dir.path().join("generation.jsonl");
    let g = Recording::new(mixed_plan());
    let logs = LogPaths { session: Some(&path), generation: Some(&gen_path) };
    let s = repair_with(&bug(), &cfg(3, 3), &g, &GeneratorConfig::default(), logs).unwrap();
    let records = read_session_log(&path).unwrap();
    assert_eq!(records.len(), 2 + s.attempts.len());
    assert!(matches!(&records[0], LogRecord::Session(h) if h.bug_id == "clamp" && h.config.breadth == 3));
    assert!(matches!(&records.last().unwrap(), LogRecord::Outcome(o) if o.outcome == s.outcome));
    let gens = std::fs::read_to_string(&gen_path).unwrap();
    assert_eq!(gens.lines().count(), s.attempts.len());
    let first: GenerationRecord = serde_json::from_str(gens.lines().next().unwrap()).unwrap();
    assert_eq!(first.prompt_hash, s.attempts[0].prompt_hash);
}

#[test]
fn interrupted_session_resumes_identically() {
    let dir = tempfile::tempdir().unwrap();
    let full_path = dir.path().join("full.jsonl");
    let config = cfg(3, 3);
    let g = Recording::new(mixed_plan());
    let full = repair_with(&bug(), &config, &g, &GeneratorConfig::default(), LogPaths { session: Some(&full_path), generation: None }).unwrap();
    assert!(full.attempts.len() > 4);

    // Keep the header and three attempts, as if the process died there.
    let text = std::fs::read_to_string(&full_path).unwrap();
    let cut: String = text.lines().take(4).map(|l| format!("{l}\n")).collect();
    let part_path = dir.path().join("part.jsonl");
    std::fs::write(&part_path, cut).unwrap();

    let g2 = Recording::new(mixed_plan());
    let resumed = resume(&bug(), &config, &g2, &GeneratorConfig::default(), LogPaths { session: Some(&part_path), generation: None }).unwrap();
    assert_eq!(resumed.outcome, full.outcome);
    // The generator is only consulted for attempts after the third.
    assert_eq!(g2.keys(), g.keys()[3..]);
    let a = strip_timestamps(&std::fs::read_to_string(&full_path).unwrap());
    let b = strip_timestamps(&std::fs::read_to_string(&part_path).unwrap());
    assert_eq!(a, b);

    // Resuming a finished log returns its outcome without generating.
    let g3 = Recording::new(ScriptedPlan::default());
    let again = resume(&bug(), &config, &g3, &GeneratorConfig::default(), LogPaths { session: Some(&part_path), generation: None }).unwrap();
    assert_eq!(again.outcome, full.outcome);
    assert!(g3.keys().is_empty());
}

#[test]
fn resume_rejects_changed_config_and_corrupt_logs() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.jsonl");
    let g = Recording::new(mixed_plan());
    let logs = LogPaths { session: Some(&path), generation: None };
    repair_with(&bug(), &cfg(3, 3), &g, &GeneratorConfig::default(), logs).unwrap();
    let e = resume(&bug(), &cfg(4, 3), &g, &GeneratorConfig::default(), logs).unwrap_err();
    assert!(matches!(e, LprError::ConfigMismatch { .. }));

    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().take(3).collect();
    lines.push("{not json");
    std::fs::write(&path, lines.join("\n")).unwrap();
    let e = resume(&bug(), &cfg(3, 3), &g, &GeneratorConfig::default(), logs).unwrap_err();
    assert!(matches!(e, LprError::LogCorrupt { line: 4, .. }), "{e}");
}

#[test]
fn scripted_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for name in ["a.jsonl", "b.jsonl"] {
        let p = dir.path().join(name);
        let g = Recording::new(mixed_plan());
        repair_with(&bug(), &cfg(3, 3), &g, &GeneratorConfig::default(), LogPaths { session: Some(&p), generation: None }).unwrap();
        texts.push(strip_timestamps(&std::fs::read_to_string(&p).unwrap()));
    }
    assert_eq!(texts[0], texts[1]);
}

mod properties {
    use proptest::prelude::*;

    use super::*;

    const CHOICES: [&str; 5] = [FIX, PARTIAL, REFINABLE, COMPILE_ERROR, "prose only"];

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn search_invariants(breadth in 1u32..5, depth in 1u32..5, picks in proptest::collection::vec(0usize..5, 25)) {
            let entries = (0..5u32)
                .flat_map(|b| (0..5u32).map(move |d| (b, d)))
                .zip(&picks)
                .map(|((b, d), &i)| ScriptEntry::exact("clamp", b, d, CHOICES[i]))
                .collect();
            let config = cfg(breadth, depth);
            let (s, g) = run(ScriptedPlan { default: None, entries }, &config);
            let n = s.attempts.len();
            prop_assert!(n <= budget(&config));
            prop_assert_eq!(s.outcome.attempts_used(), n);
            prop_assert_eq!(g.keys().len(), n);

            // Success iff the final attempt passed, and nothing follows it.
            let passed: Vec<usize> = s.attempts.iter().enumerate()
                .filter(|(_, a)| a.verdict == ValidationVerdict::AllPass).map(|(i, _)| i).collect();
            match &s.outcome {
                RepairOutcome::Success { .. } => prop_assert_eq!(passed, vec![n - 1]),
                RepairOutcome::Unfixable { .. } => prop_assert!(passed.is_empty()),
            }

            for (i, a) in s.attempts.iter().enumerate() {
                prop_assert!(a.d < depth && a.b < breadth);
                if a.d > 0 {
                    // Depth steps only follow refinable patches of the same round.
                    let prev = &s.attempts[i - 1];
                    prop_assert_eq!((prev.b, prev.d + 1), (a.b, a.d));
                    prop_assert_eq!(prev.verdict, ValidationVerdict::Refinable);
                    prop_assert_eq!(Some(&a.traced_program_hash), prev.patched_program_hash.as_ref());
                } else if i > 0 {
                    prop_assert!(s.attempts[i - 1].verdict != ValidationVerdict::Refinable || s.attempts[i - 1].d == depth - 1);
                }
            }
        }
    }
}
