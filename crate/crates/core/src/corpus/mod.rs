//! Seeded bug corpus: `bugs/<id>/{program.mini, tests.mini, bug.json, fix.mini}`.
//!
//! A case may also ship `partial.mini`, a target-function rewrite that fixes
//! some but not all failing tests.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::minilang::{
    parse_named, parse_suite, replace_function, resolve_suite, run_tests, ExecLimits, FunctionDef, ParseError,
    Program, TestSuite,
};

pub const METADATA_FILE: &str = "bug.json";
pub const PROGRAM_FILE: &str = "program.mini";
pub const TESTS_FILE: &str = "tests.mini";
pub const FIX_FILE: &str = "fix.mini";
pub const PARTIAL_FILE: &str = "partial.mini";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BugMeta {
    pub id: String,
    pub target_function: String,
    pub description: String,
    #[serde(default)]
    pub tags: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct BugCase {
    pub id: String,
    pub dir: PathBuf,
    pub program_path: PathBuf,
    pub tests_path: PathBuf,
    pub target_function: String,
    pub reference_fix_path: Option<PathBuf>,
    pub partial_fix_path: Option<PathBuf>,
    pub description: String,
    pub tags: Vec<String>,
    pub program: Program,
    pub suite: TestSuite,
    pub reference_fix_source: Option<String>,
    pub partial_fix_source: Option<String>,
}

impl BugCase {
    pub fn target(&self) -> &FunctionDef {
        self.program.function(&self.target_function).expect("target checked at load")
    }

    pub fn reference_fix(&self) -> Option<&str> {
        self.reference_fix_source.as_deref()
    }

    pub fn partial_fix(&self) -> Option<&str> {
        self.partial_fix_source.as_deref()
    }

    /// Builds a case from in-memory sources, with no backing directory.
    pub fn from_sources(
        id: &str,
        target_function: &str,
        program_src: &str,
        tests_src: &str,
        reference_fix: Option<&str>,
    ) -> Result<BugCase, CaseError> {
        let meta = BugMeta {
            id: id.to_string(),
            target_function: target_function.to_string(),
            description: String::new(),
            tags: Vec::new(),
        };
        let mut case = Self::assemble(Path::new(""), meta, program_src, tests_src)?;
        case.reference_fix_source = reference_fix.map(str::to_string);
        Ok(case)
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.tags.iter().any(|t| t == tag)
    }

    /// Loads one case directory.
    pub fn load(dir: &Path) -> Result<BugCase, CaseError> {
        let err = |id: Option<&str>, problem| CaseError { dir: dir.to_path_buf(), id: id.map(str::to_string), problem };
        let meta_path = dir.join(METADATA_FILE);
        let meta_text = fs::read_to_string(&meta_path).map_err(|_| err(None, CaseProblem::MissingMetadata))?;
        let meta: BugMeta =
            serde_json::from_str(&meta_text).map_err(|e| err(None, CaseProblem::BadMetadata(e.to_string())))?;
        let program_src = fs::read_to_string(dir.join(PROGRAM_FILE))
            .map_err(|_| err(Some(&meta.id), CaseProblem::MissingProgram))?;
        let tests_src =
            fs::read_to_string(dir.join(TESTS_FILE)).map_err(|_| err(Some(&meta.id), CaseProblem::MissingTests))?;
        let mut case = Self::assemble(dir, meta, &program_src, &tests_src)?;
        let existing = |name: &str| Some(dir.join(name)).filter(|p| p.is_file());
        case.reference_fix_path = existing(FIX_FILE);
        case.partial_fix_path = existing(PARTIAL_FILE);
        case.reference_fix_source = case.reference_fix_path.as_ref().and_then(|p| fs::read_to_string(p).ok());
        case.partial_fix_source = case.partial_fix_path.as_ref().and_then(|p| fs::read_to_string(p).ok());
        Ok(case)
    }

    fn assemble(dir: &Path, meta: BugMeta, program_src: &str, tests_src: &str) -> Result<BugCase, CaseError> {
        let err = |problem| CaseError { dir: dir.to_path_buf(), id: Some(meta.id.clone()), problem };
        let program = parse_named(program_src, PROGRAM_FILE)
            .map_err(|error| err(CaseProblem::Parse { file: PROGRAM_FILE.into(), error }))?;
        let suite = parse_suite(tests_src, TESTS_FILE)
            .map_err(|error| err(CaseProblem::Parse { file: TESTS_FILE.into(), error }))?;
        resolve_suite(&suite, &program).map_err(|error| err(CaseProblem::Parse { file: TESTS_FILE.into(), error }))?;
        if suite.cases.is_empty() {
            return Err(err(CaseProblem::NoTests));
        }
        if program.function(&meta.target_function).is_none() {
            return Err(err(CaseProblem::UnknownTarget(meta.target_function.clone())));
        }
        Ok(BugCase {
            id: meta.id,
            dir: dir.to_path_buf(),
            program_path: dir.join(PROGRAM_FILE),
            tests_path: dir.join(TESTS_FILE),
            target_function: meta.target_function,
            reference_fix_path: None,
            partial_fix_path: None,
            description: meta.description,
            tags: meta.tags,
            program,
            suite,
            reference_fix_source: None,
            partial_fix_source: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CaseProblem {
    MissingMetadata,
    BadMetadata(String),
    MissingProgram,
    MissingTests,
    NoTests,
    Parse { file: String, error: ParseError },
    UnknownTarget(String),
    DuplicateId(String),
}

impl fmt::Display for CaseProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CaseProblem::MissingMetadata => write!(f, "missing {METADATA_FILE}"),
            CaseProblem::BadMetadata(e) => write!(f, "malformed {METADATA_FILE}: {e}"),
            CaseProblem::MissingProgram => write!(f, "missing {PROGRAM_FILE}"),
            CaseProblem::MissingTests => write!(f, "missing {TESTS_FILE}"),
            CaseProblem::NoTests => write!(f, "{TESTS_FILE} defines no tests"),
            CaseProblem::Parse { file, error } => write!(f, "{file}:{error}"),
            CaseProblem::UnknownTarget(t) => write!(f, "target function `{t}` not found in {PROGRAM_FILE}"),
            CaseProblem::DuplicateId(id) => write!(f, "duplicate bug id `{id}`"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}: {problem}", .id.as_deref().map(str::to_string).unwrap_or_else(|| .dir.display().to_string()))]
pub struct CaseError {
    pub dir: PathBuf,
    pub id: Option<String>,
    pub problem: CaseProblem,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus root {0} does not exist")]
    RootMissing(PathBuf),
    #[error("cannot read {0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("{} malformed case(s):\n{}", .0.len(), .0.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n"))]
    Cases(Vec<CaseError>),
}

/// The directory holding case directories: `<root>/bugs` when present, else `root`.
pub fn bugs_dir(root: &Path) -> PathBuf {
    let nested = root.join("bugs");
    if nested.is_dir() {
        nested
    } else {
        root.to_path_buf()
    }
}

/// Loads every case directory that has a `bug.json`, sorted by id.
pub fn load_corpus(root: &Path) -> Result<Vec<BugCase>, CorpusError> {
    if !root.is_dir() {
        return Err(CorpusError::RootMissing(root.to_path_buf()));
    }
    let dir = bugs_dir(root);
    let mut entries: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(|e| CorpusError::Io(dir.clone(), e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(METADATA_FILE).is_file())
        .collect();
    entries.sort();

    let mut cases = Vec::new();
    let mut errors = Vec::new();
    let mut seen: BTreeMap<String, PathBuf> = BTreeMap::new();
    for path in entries {
        match BugCase::load(&path) {
            Ok(case) => {
                if seen.contains_key(&case.id) {
                    errors.push(CaseError {
                        dir: path,
                        id: Some(case.id.clone()),
                        problem: CaseProblem::DuplicateId(case.id),
                    });
                } else {
                    seen.insert(case.id.clone(), path);
                    cases.push(case);
                }
            }
            Err(e) => errors.push(e),
        }
    }
    if !errors.is_empty() {
        return Err(CorpusError::Cases(errors));
    }
    cases.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(cases)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegrityReport {
    pub id: String,
    pub buggy_fails: bool,
    pub failing_tests: Vec<String>,
    /// `None` when the case ships no reference fix.
    pub fix_passes: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fix_error: Option<String>,
    /// Present when the case ships `partial.mini`: it must pass more tests than
    /// the bug and fewer than all.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partial_is_partial: Option<bool>,
}

impl IntegrityReport {
    pub fn ok(&self) -> bool {
        self.buggy_fails && self.fix_passes != Some(false) && self.partial_is_partial != Some(false)
    }
}

pub fn check_case(case: &BugCase, limits: ExecLimits) -> IntegrityReport {
    let buggy = run_tests(&case.program, &case.suite.cases, limits);
    let failing_tests: Vec<String> = buggy.failing().map(|r| r.name.clone()).collect();

    let mut fix_error = None;
    let fix_passes = case.reference_fix().map(|src| match splice_and_run(case, src, limits) {
        Ok((_, failed)) => failed == 0,
        Err(e) => {
            fix_error = Some(e);
            false
        }
    });
    let partial_is_partial = case.partial_fix().map(|src| match splice_and_run(case, src, limits) {
        Ok((passed, failed)) => failed > 0 && passed > buggy.passed_count(),
        Err(_) => false,
    });

    IntegrityReport {
        id: case.id.clone(),
        buggy_fails: !failing_tests.is_empty(),
        failing_tests,
        fix_passes,
        fix_error,
        partial_is_partial,
    }
}

fn splice_and_run(case: &BugCase, src: &str, limits: ExecLimits) -> Result<(usize, usize), String> {
    let patched = replace_function(&case.program, &case.target_function, src).map_err(|e| e.to_string())?;
    resolve_suite(&case.suite, &patched).map_err(|e| e.to_string())?;
    let report = run_tests(&patched, &case.suite.cases, limits);
    Ok((report.passed_count(), report.failed_count()))
}
