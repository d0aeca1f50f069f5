use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

use crate::lpr::RepairOutcome;
use crate::patchgen::GeneratorKind;
use crate::tracer::AblationMode;
use crate::validator::RefMatch;

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_MD: &str = "report.md";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BugStatus {
    Success,
    Unfixable,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugRun {
    pub id: String,
    pub outcome: BugStatus,
    pub attempts_used: usize,
    pub b: Option<u32>,
    pub d: Option<u32>,
    pub matches_reference: RefMatch,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl BugRun {
    pub fn from_outcome(id: &str, outcome: &RepairOutcome, matches_reference: RefMatch) -> Self {
        let (status, b, d) = match outcome {
            RepairOutcome::Success { b, d, .. } => (BugStatus::Success, Some(*b), Some(*d)),
            RepairOutcome::Unfixable { .. } => (BugStatus::Unfixable, None, None),
        };
        BugRun {
            id: id.to_string(),
            outcome: status,
            attempts_used: outcome.attempts_used(),
            b,
            d,
            matches_reference,
            error: None,
        }
    }

    pub fn failed(id: &str, error: String) -> Self {
        BugRun {
            id: id.to_string(),
            outcome: BugStatus::Error,
            attempts_used: 0,
            b: None,
            d: None,
            matches_reference: RefMatch::Unknown,
            error: Some(error),
        }
    }
}

/// Everything needed to rerun the experiment with a scripted generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub breadth: u32,
    pub depth: u32,
    pub max_patch_attempts: usize,
    pub mode: AblationMode,
    pub attempt_timeout_ms: u64,
    pub refinable_requires_partial_pass: bool,
    pub generator: GeneratorKind,
    pub model: String,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    pub max_steps: u64,
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub case_count: usize,
    pub plausible_count: usize,
    pub fix_rate: f64,
    /// Mean attempts over all cases.
    pub mean_attempts: f64,
    /// Mean attempts over fixed cases, the cost per fixed bug.
    pub mean_attempts_fixed: f64,
    pub max_attempts: usize,
    pub error_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub per_bug: Vec<BugRun>,
    pub totals: Totals,
    pub config_echo: ConfigEcho,
}

fn mean(xs: &[usize]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<usize>() as f64 / xs.len() as f64
    }
}

impl RunReport {
    pub fn new(mut per_bug: Vec<BugRun>, config_echo: ConfigEcho) -> Self {
        per_bug.sort_by(|a, b| a.id.cmp(&b.id));
        let all: Vec<usize> = per_bug.iter().map(|r| r.attempts_used).collect();
        let fixed: Vec<usize> =
            per_bug.iter().filter(|r| r.outcome == BugStatus::Success).map(|r| r.attempts_used).collect();
        let case_count = per_bug.len();
        let totals = Totals {
            case_count,
            plausible_count: fixed.len(),
            fix_rate: if case_count == 0 { 0.0 } else { fixed.len() as f64 / case_count as f64 },
            mean_attempts: mean(&all),
            mean_attempts_fixed: mean(&fixed),
            max_attempts: all.iter().copied().max().unwrap_or(0),
            error_count: per_bug.iter().filter(|r| r.outcome == BugStatus::Error).count(),
        };
        RunReport { per_bug, totals, config_echo }
    }

    pub fn to_markdown(&self) -> String {
        let c = &self.config_echo;
        let t = &self.totals;
        let mut out = String::new();
        let _ = writeln!(out, "# Repair run\n");
        let _ = writeln!(
            out,
            "B={} D={} (max {} attempts per bug), mode {}, generator {:?}, model {}, temperature {}\n",
            c.breadth, c.depth, c.max_patch_attempts, c.mode, c.generator, c.model, c.temperature
        );
        let _ = writeln!(out, "| bug | outcome | attempts | b | d | matches reference |");
        let _ = writeln!(out, "|---|---|---|---|---|---|");
        for r in &self.per_bug {
            let opt = |v: Option<u32>| v.map_or("-".to_string(), |x| x.to_string());
            let _ = writeln!(
                out,
                "| {} | {:?} | {} | {} | {} | {:?} |",
                r.id,
                r.outcome,
                r.attempts_used,
                opt(r.b),
                opt(r.d),
                r.matches_reference
            );
        }
        let _ = writeln!(
            out,
            "\nPlausible: {}/{} (fix rate {:.3}). Mean attempts {:.2}, per fixed bug {:.2}, max {}.",
            t.plausible_count, t.case_count, t.fix_rate, t.mean_attempts, t.mean_attempts_fixed, t.max_attempts
        );
        if t.error_count > 0 {
            let _ = writeln!(out, "Errors: {}.", t.error_count);
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no runs found under {0}")]
    NoRuns(String),
    #[error("cannot read {path}: {detail}")]
    Io { path: PathBuf, detail: String },
    #[error("{path} is not a valid report: {detail}")]
    Corrupt { path: PathBuf, detail: String },
}

/// Finds every `report.json` below `dirs`, sorted by path.
pub fn load_reports(dirs: &[PathBuf]) -> Result<Vec<(PathBuf, RunReport)>, ReportError> {
    let mut paths = Vec::new();
    for dir in dirs {
        if !dir.exists() {
            return Err(ReportError::Io { path: dir.clone(), detail: "no such file or directory".into() });
        }
        for entry in WalkDir::new(dir).sort_by_file_name() {
            let entry = entry.map_err(|e| ReportError::Io { path: dir.clone(), detail: e.to_string() })?;
            if entry.file_type().is_file() && entry.file_name() == REPORT_JSON {
                paths.push(entry.into_path());
            }
        }
    }
    if paths.is_empty() {
        let names: Vec<String> = dirs.iter().map(|d| d.display().to_string()).collect();
        return Err(ReportError::NoRuns(names.join(", ")));
    }
    paths.sort();
    paths.dedup();
    paths
        .into_iter()
        .map(|p| {
            let text = std::fs::read_to_string(&p).map_err(|e| ReportError::Io { path: p.clone(), detail: e.to_string() })?;
            let report = serde_json::from_str(&text).map_err(|e| ReportError::Corrupt { path: p.clone(), detail: e.to_string() })?;
            Ok((p, report))
        })
        .collect()
}

fn rel(p: &Path) -> String {
    p.parent().map(|d| d.display().to_string()).unwrap_or_default()
}

/// One row per run.
pub fn summary_table(reports: &[(PathBuf, RunReport)]) -> String {
    let mut out = String::from("| run | mode | B | D | cases | plausible | fix rate | mean attempts | attempts per fix | max attempts |\n");
    out.push_str("|---|---|---|---|---|---|---|---|---|---|\n");
    for (p, r) in reports {
        let (c, t) = (&r.config_echo, &r.totals);
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {:.3} | {:.2} | {:.2} | {} |",
            rel(p),
            c.mode,
            c.breadth,
            c.depth,
            t.case_count,
            t.plausible_count,
            t.fix_rate,
            t.mean_attempts,
            t.mean_attempts_fixed,
            t.max_attempts
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mode: AblationMode,
    pub breadth: u32,
    pub depth: u32,
    pub max_patch_attempts: usize,
    pub runs: usize,
    pub case_count: usize,
    pub plausible_count: usize,
    pub fix_rate: f64,
    pub mean_attempts: f64,
    pub mean_attempts_fixed: f64,
    pub max_attempts_used: usize,
}

/// Aggregates runs per (mode, B, D) configuration.
pub fn sweep_rows(reports: &[(PathBuf, RunReport)]) -> Vec<SweepRow> {
    let mut groups: BTreeMap<(String, u32, u32), Vec<&RunReport>> = BTreeMap::new();
    for (_, r) in reports {
        let c = &r.config_echo;
        groups.entry((c.mode.as_str().to_string(), c.breadth, c.depth)).or_default().push(r);
    }
    groups
        .into_values()
        .map(|rs| {
            let c = &rs[0].config_echo;
            let bugs: Vec<&BugRun> = rs.iter().flat_map(|r| &r.per_bug).collect();
            let all: Vec<usize> = bugs.iter().map(|b| b.attempts_used).collect();
            let fixed: Vec<usize> =
                bugs.iter().filter(|b| b.outcome == BugStatus::Success).map(|b| b.attempts_used).collect();
            SweepRow {
                mode: c.mode,
                breadth: c.breadth,
                depth: c.depth,
                max_patch_attempts: c.breadth as usize * c.depth as usize,
                runs: rs.len(),
                case_count: bugs.len(),
                plausible_count: fixed.len(),
                fix_rate: if bugs.is_empty() { 0.0 } else { fixed.len() as f64 / bugs.len() as f64 },
                mean_attempts: mean(&all),
                mean_attempts_fixed: mean(&fixed),
                max_attempts_used: all.iter().copied().max().unwrap_or(0),
            }
        })
        .collect()
}

pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "| mode | B | D | max_patch_attempts | runs | cases | plausible | fix rate | mean attempts | attempts per fix | max attempts used |\n",
    );
    out.push_str("|---|---|---|---|---|---|---|---|---|---|---|\n");
    for r in rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} | {:.3} | {:.2} | {:.2} | {} |",
            r.mode,
            r.breadth,
            r.depth,
            r.max_patch_attempts,
            r.runs,
            r.case_count,
            r.plausible_count,
            r.fix_rate,
            r.mean_attempts,
            r.mean_attempts_fixed,
            r.max_attempts_used
        );
    }
    out
}
