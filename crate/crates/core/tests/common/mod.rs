#![allow(dead_code)]

pub mod stub;

use std::path::PathBuf;

use tracefix::corpus::{load_corpus, BugCase};
use tracefix::minilang::print_function;
use tracefix::patchgen::{ScriptEntry, ScriptedPlan};
use tracefix::promptkit::MARKER;

pub fn repo_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

pub fn corpus() -> Vec<BugCase> {
    load_corpus(&repo_path("corpus")).expect("shipped corpus loads")
}

pub fn marked(function_source: &str) -> String {
    format!("{MARKER}\n{function_source}")
}

/// Compares against a checked-in file; `UPDATE_FIXTURES=1` rewrites it.
pub fn golden(rel: &str, actual: &str) {
    let path = repo_path(rel);
    if std::env::var_os("UPDATE_FIXTURES").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_default();
    assert_eq!(actual, expected, "golden mismatch for {rel}; rerun with UPDATE_FIXTURES=1 after review");
}

pub fn plan_json(plan: &ScriptedPlan) -> String {
    format!("{}\n", serde_json::to_string_pretty(plan).unwrap())
}

/// Every bug's reference fix at one (b, d); anything else is a compile error.
pub fn allfix_plan(cases: &[BugCase], b: u32, d: u32) -> ScriptedPlan {
    ScriptedPlan {
        default: Some(compile_error_output("unrelated")),
        entries: cases
            .iter()
            .map(|c| ScriptEntry::exact(&c.id, b, d, marked(c.reference_fix().expect("reference fix"))))
            .collect(),
    }
}

pub fn compile_error_output(target: &str) -> String {
    marked(&format!("fn {target}() {{\n    return undefined_helper();\n}}\n"))
}

fn per_bug(cases: &[BugCase], output: impl Fn(&BugCase) -> String) -> ScriptedPlan {
    ScriptedPlan {
        default: None,
        entries: cases
            .iter()
            .map(|c| ScriptEntry { bug: c.id.clone(), b: None, d: None, requires: vec![], output: output(c) })
            .collect(),
    }
}

/// Always returns a patch that fails to compile.
pub fn compile_error_plan(cases: &[BugCase]) -> ScriptedPlan {
    per_bug(cases, |c| compile_error_output(&c.target_function))
}

/// Always returns the buggy function unchanged: it runs, fails, and is refinable.
pub fn echo_plan(cases: &[BugCase]) -> ScriptedPlan {
    per_bug(cases, |c| marked(&print_function(c.target())))
}

/// The prompt fragment each bug's scripted "model" needs to see before it
/// produces the fix. Each names one kind of runtime fact.
pub const ABLATION_CUES: &[(&str, &str)] = &[
    ("binary-search", "-> Branch (lo < hi) evaluated false"),
    ("chart5-add-or-update", "-> Return index_of = -1"),
    ("count-matches", "-> Local Variable count = 0"),
    ("fahrenheit", "-> Local Variable factor = 1"),
    ("fizzbuzz-order", "-> Branch (n % 3 == 0) evaluated true"),
    ("gcd-division", "-> Local Variable b = 2"),
    ("last-index-of", "-> Branch (i > 0) evaluated false"),
    ("leap-year", "-> Return divisible = false"),
    ("math87-basic-row", "-> Local Variable entry = 5.551115123125783e-17"),
    ("max-of", "-> Branch (xs[i] < best) evaluated false"),
    ("mean-empty", "-> Return total = 0.0"),
    ("median-even", "-> Local Variable mid = 2"),
    ("order-discount", "-> Call discount(4)"),
    ("reverse-string", "-> Local Variable n = 5"),
    ("sum-inclusive", "-> Local Variable total = 6"),
    ("tar-header-size", "-> Return parse_octal = 591"),
    ("triangle-kind", "-> Branch (a == b || b == c || a == c) evaluated true"),
];

/// Returns the fix only when the bug's cue is visible; compile error otherwise.
pub fn ablation_plan(cases: &[BugCase]) -> ScriptedPlan {
    let mut entries = Vec::new();
    for c in cases {
        let cue = ABLATION_CUES.iter().find(|(id, _)| *id == c.id).map(|(_, cue)| cue.to_string());
        let cue = cue.unwrap_or_else(|| panic!("no ablation cue for {}", c.id));
        entries.push(ScriptEntry {
            bug: c.id.clone(),
            b: None,
            d: None,
            requires: vec![cue],
            output: marked(c.reference_fix().unwrap()),
        });
        entries.push(ScriptEntry {
            bug: c.id.clone(),
            b: None,
            d: None,
            requires: vec![],
            output: compile_error_output(&c.target_function),
        });
    }
    ScriptedPlan { default: None, entries }
}

pub fn strip_timestamps(text: &str) -> String {
    text.lines()
        .map(|l| {
            let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
            v.as_object_mut().unwrap().remove("timestamp_ms");
            v.to_string()
        })
        .collect::<Vec<_>>()
        .join("\n")
}
