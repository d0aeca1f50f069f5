use super::interp::{repr, values_equal, ErrorKind};
use super::value::Value;

/// Absolute tolerance `assert_eq` applies to floats when no third argument is given.
pub const DEFAULT_FLOAT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Len,
    Push,
    PrintLine,
    AssertEq,
    AssertTrue,
    Abs,
    ToFloat,
    ToInt,
}

pub const ALL: [Builtin; 8] = [
    Builtin::Len,
    Builtin::Push,
    Builtin::PrintLine,
    Builtin::AssertEq,
    Builtin::AssertTrue,
    Builtin::Abs,
    Builtin::ToFloat,
    Builtin::ToInt,
];

impl Builtin {
    pub fn lookup(name: &str) -> Option<Builtin> {
        ALL.into_iter().find(|b| b.name() == name)
    }

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Len => "len",
            Builtin::Push => "push",
            Builtin::PrintLine => "print_line",
            Builtin::AssertEq => "assert_eq",
            Builtin::AssertTrue => "assert_true",
            Builtin::Abs => "abs",
            Builtin::ToFloat => "to_float",
            Builtin::ToInt => "to_int",
        }
    }

    /// Inclusive arity range.
    pub fn arity(self) -> (usize, usize) {
        match self {
            Builtin::Push => (2, 2),
            Builtin::AssertEq => (2, 3),
            _ => (1, 1),
        }
    }

    /// Human-readable signature, used in call contexts.
    pub fn signature(self) -> &'static str {
        match self {
            Builtin::Len => "builtin len(value: Array | Str) -> Int",
            Builtin::Push => "builtin push(array_var: Array, item) -> Unit  (appends in place)",
            Builtin::PrintLine => "builtin print_line(value) -> Unit",
            Builtin::AssertEq => "builtin assert_eq(actual, expected, tolerance?) -> Unit",
            Builtin::AssertTrue => "builtin assert_true(cond: Bool) -> Unit",
            Builtin::Abs => "builtin abs(x: Int | Float) -> Int | Float",
            Builtin::ToFloat => "builtin to_float(x: Int | Float) -> Float",
            Builtin::ToInt => "builtin to_int(x: Int | Float) -> Int  (truncates)",
        }
    }
}

pub(crate) type BuiltinError = (ErrorKind, String, Option<(String, String)>);

fn mismatch(msg: String) -> BuiltinError {
    (ErrorKind::TypeMismatch, msg, None)
}

/// Applies every builtin except `push`, which needs access to the caller's frame.
pub(crate) fn apply(b: Builtin, mut args: Vec<Value>, output: &mut Vec<String>) -> Result<Value, BuiltinError> {
    match b {
        Builtin::Len => match &args[0] {
            Value::Array(items) => Ok(Value::Int(items.len() as i64)),
            Value::Str(s) => Ok(Value::Int(s.chars().count() as i64)),
            other => Err(mismatch(format!("len expects Array or Str, got {}", other.type_name()))),
        },
        Builtin::PrintLine => {
            output.push(args[0].to_string());
            Ok(Value::Unit)
        }
        Builtin::AssertEq => {
            let tolerance = match args.get(2) {
                None => DEFAULT_FLOAT_TOLERANCE,
                Some(Value::Float(t)) => *t,
                Some(Value::Int(t)) => *t as f64,
                Some(other) => return Err(mismatch(format!("assert_eq tolerance must be numeric, got {}", other.type_name()))),
            };
            args.truncate(2);
            let expected = args.pop().unwrap();
            let actual = args.pop().unwrap();
            let ok = match (&actual, &expected) {
                (Value::Float(_), Value::Float(_) | Value::Int(_)) | (Value::Int(_), Value::Float(_)) => {
                    (to_f64(&actual) - to_f64(&expected)).abs() <= tolerance
                }
                _ => values_equal(&actual, &expected),
            };
            if ok {
                Ok(Value::Unit)
            } else {
                Err(assertion(repr(&expected), repr(&actual)))
            }
        }
        Builtin::AssertTrue => match args[0] {
            Value::Bool(true) => Ok(Value::Unit),
            Value::Bool(false) => Err(assertion("true".into(), "false".into())),
            ref other => Err(mismatch(format!("assert_true expects Bool, got {}", other.type_name()))),
        },
        Builtin::Abs => match args[0] {
            Value::Int(i) => Ok(Value::Int(i.wrapping_abs())),
            Value::Float(x) => Ok(Value::Float(x.abs())),
            ref other => Err(mismatch(format!("abs expects a number, got {}", other.type_name()))),
        },
        Builtin::ToFloat => match args[0] {
            Value::Int(i) => Ok(Value::Float(i as f64)),
            Value::Float(x) => Ok(Value::Float(x)),
            ref other => Err(mismatch(format!("to_float expects a number, got {}", other.type_name()))),
        },
        Builtin::ToInt => match args[0] {
            Value::Int(i) => Ok(Value::Int(i)),
            Value::Float(x) if x.is_finite() => Ok(Value::Int(x.trunc() as i64)),
            ref other => Err(mismatch(format!("to_int expects a finite number, got {}", other.render(Default::default())))),
        },
        Builtin::Push => unreachable!("push is handled by the interpreter"),
    }
}

fn to_f64(v: &Value) -> f64 {
    match v {
        Value::Int(i) => *i as f64,
        Value::Float(x) => *x,
        _ => f64::NAN,
    }
}

fn assertion(expected: String, actual: String) -> BuiltinError {
    let msg = format!("expected:<{expected}> but was:<{actual}>");
    (ErrorKind::AssertionFailure, msg, Some((expected, actual)))
}
