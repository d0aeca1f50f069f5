use std::fmt;

use serde::{Deserialize, Serialize};

use super::printer::{format_float, quote_str};

/// Runtime value. Arrays have value semantics: assignment and argument
/// passing copy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value")]
pub enum Value {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
    Array(Vec<Value>),
    Unit,
}

/// Bounds applied when rendering values into traces and messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderLimits {
    pub max_elements: usize,
    pub max_chars: usize,
}

impl Default for RenderLimits {
    fn default() -> Self {
        RenderLimits { max_elements: 16, max_chars: 80 }
    }
}

impl RenderLimits {
    pub const UNBOUNDED: RenderLimits = RenderLimits { max_elements: usize::MAX, max_chars: usize::MAX };
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "Int",
            Value::Float(_) => "Float",
            Value::Bool(_) => "Bool",
            Value::Str(_) => "Str",
            Value::Array(_) => "Array",
            Value::Unit => "Unit",
        }
    }

    /// Renders with arrays cut at `max_elements` and strings at `max_chars`,
    /// elided parts shown as `...`.
    pub fn render(&self, limits: RenderLimits) -> String {
        let mut out = String::new();
        self.render_into(limits, &mut out);
        out
    }

    fn render_into(&self, limits: RenderLimits, out: &mut String) {
        match self {
            Value::Int(v) => out.push_str(&v.to_string()),
            Value::Float(v) => out.push_str(&format_float(*v)),
            Value::Bool(v) => out.push_str(if *v { "true" } else { "false" }),
            Value::Str(s) => {
                if s.chars().count() > limits.max_chars {
                    let cut: String = s.chars().take(limits.max_chars).collect();
                    out.push_str(&quote_str(&cut));
                    out.push_str("...");
                } else {
                    out.push_str(&quote_str(s));
                }
            }
            Value::Array(items) => {
                out.push('[');
                for (i, item) in items.iter().take(limits.max_elements).enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    item.render_into(limits, out);
                }
                if items.len() > limits.max_elements {
                    if limits.max_elements > 0 {
                        out.push_str(", ");
                    }
                    out.push_str("...");
                }
                out.push(']');
            }
            Value::Unit => out.push_str("()"),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Str(s) => f.write_str(s),
            other => f.write_str(&other.render(RenderLimits::UNBOUNDED)),
        }
    }
}
