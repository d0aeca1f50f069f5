use thiserror::Error;

use super::{Origin, Patch, MARKER};
use crate::minilang::parse_unresolved;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractionError {
    #[error("no `{MARKER}` marker in output")]
    NoMarker,
    #[error("`{MARKER}` marker appears {0} times, expected once")]
    MultipleMarkers(usize),
    #[error("no parsable function after marker: {0}")]
    NoParse(String),
    #[error("extracted function is `{found}`, expected `{expected}`")]
    WrongName { expected: String, found: String },
}

fn is_fence(line: &str) -> bool {
    line.trim_start().starts_with("```")
}

fn starts_function(line: &str) -> bool {
    let t = line.trim_start();
    t.starts_with("fn ") || t.starts_with("fn\t")
}

/// Byte length of the first balanced `{ ... }` group in `text`, counted from
/// the start; string literals and line comments are skipped.
fn balanced_len(text: &str) -> Option<usize> {
    let bytes = text.as_bytes();
    let mut depth = 0usize;
    let mut opened = false;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'"' => {
                i += 1;
                while i < bytes.len() && bytes[i] != b'"' {
                    if bytes[i] == b'\\' {
                        i += 1;
                    }
                    i += 1;
                }
            }
            b'/' if bytes.get(i + 1) == Some(&b'/') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                continue;
            }
            b'{' => {
                depth += 1;
                opened = true;
            }
            b'}' => {
                depth = depth.checked_sub(1)?;
                if opened && depth == 0 {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
        i += 1;
    }
    None
}

/// Pulls the fixed function for `target` out of raw model output.
///
/// The output must contain the marker line exactly once. Code fences are
/// dropped, then the first complete `fn` definition after the marker is
/// parsed and its name checked.
pub fn extract_patch(model_output: &str, target: &str) -> Result<Patch, ExtractionError> {
    let lines: Vec<&str> = model_output.lines().collect();
    let markers: Vec<usize> =
        lines.iter().enumerate().filter(|(_, l)| l.trim_start().starts_with(MARKER)).map(|(i, _)| i).collect();
    let marker = match markers.as_slice() {
        [] => return Err(ExtractionError::NoMarker),
        [m] => *m,
        many => return Err(ExtractionError::MultipleMarkers(many.len())),
    };

    let after: Vec<&str> = lines[marker + 1..].iter().copied().filter(|l| !is_fence(l)).collect();
    let start = after
        .iter()
        .position(|l| starts_function(l))
        .ok_or_else(|| ExtractionError::NoParse("no `fn` definition follows the marker".into()))?;
    let body = after[start..].join("\n");
    let len = balanced_len(&body).ok_or_else(|| ExtractionError::NoParse("unterminated function body".into()))?;
    let mut source = body[..len].to_string();
    source.push('\n');

    let parsed = parse_unresolved(&source).map_err(|e| ExtractionError::NoParse(e.to_string()))?;
    let f = &parsed.functions[0];
    if f.name != target {
        return Err(ExtractionError::WrongName { expected: target.to_string(), found: f.name.clone() });
    }
    Ok(Patch { function_source: source, origin_attempt: Origin::default(), verdict: None })
}
