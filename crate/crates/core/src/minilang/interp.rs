//! Deterministic tree-walking interpreter.
//!
//! Every statement execution and every expression evaluation costs one step.
//! Execution halts with [`ExecOutcome::BudgetExceeded`] once `max_steps` steps
//! have been spent, and with a `StackOverflow` error when the call depth would
//! exceed `max_call_depth`.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::builtins::{self, Builtin};
use super::value::{RenderLimits, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecLimits {
    pub max_steps: u64,
    pub max_call_depth: u32,
}

impl Default for ExecLimits {
    fn default() -> Self {
        ExecLimits { max_steps: 1_000_000, max_call_depth: 512 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ErrorKind {
    DivByZero,
    IndexOutOfBounds,
    TypeMismatch,
    UndefinedVariable,
    AssertionFailure,
    StackOverflow,
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeError {
    pub kind: ErrorKind,
    pub line: u32,
    /// Function whose body contains `line`.
    pub function: String,
    pub message: String,
    /// Rendered (expected, actual) pair for assertion failures.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assertion: Option<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status")]
pub enum ExecOutcome {
    Completed { value: Value },
    RuntimeError { error: RuntimeError },
    BudgetExceeded { steps_used: u64 },
}

/// Hooks invoked while executing. `function` is always the function whose
/// body is currently executing.
#[allow(unused_variables)]
pub trait Observer {
    fn var_write(&mut self, function: &str, line: u32, name: &str, value: &Value) {}
    fn branch(&mut self, function: &str, line: u32, cond: &Expr, outcome: bool) {}
    fn call(&mut self, function: &str, line: u32, callee: &str, args: &[Value]) {}
    fn ret(&mut self, function: &str, line: u32, callee: &str, value: &Value) {}
}

pub struct NoopObserver;

impl Observer for NoopObserver {}

pub(crate) enum Halt {
    Error(RuntimeError),
    Budget,
}

enum Flow {
    Normal,
    Return(Value),
}

/// One interpreter run over a table of function definitions.
pub struct Machine<'a, O: Observer> {
    functions: HashMap<&'a str, &'a FunctionDef>,
    limits: ExecLimits,
    steps: u64,
    depth: u32,
    observer: &'a mut O,
    pub output: Vec<String>,
}

type Frame = HashMap<String, Value>;

impl<'a, O: Observer> Machine<'a, O> {
    /// Earlier definitions win when names collide.
    pub fn new(defs: impl IntoIterator<Item = &'a FunctionDef>, limits: ExecLimits, observer: &'a mut O) -> Self {
        let mut functions = HashMap::new();
        for f in defs {
            functions.entry(f.name.as_str()).or_insert(f);
        }
        Machine { functions, limits, steps: 0, depth: 0, observer, output: Vec::new() }
    }

    pub fn steps_used(&self) -> u64 {
        self.steps
    }

    pub fn has_function(&self, name: &str) -> bool {
        self.functions.contains_key(name)
    }

    /// Runs `entry` to completion. Caller guarantees the entry exists and
    /// the arity matches.
    pub fn run(&mut self, entry: &str, args: Vec<Value>) -> ExecOutcome {
        let f = self.functions[entry];
        match self.call_user(f, args) {
            Ok(value) => ExecOutcome::Completed { value },
            Err(Halt::Error(error)) => ExecOutcome::RuntimeError { error },
            Err(Halt::Budget) => ExecOutcome::BudgetExceeded { steps_used: self.steps },
        }
    }

    fn tick(&mut self) -> Result<(), Halt> {
        if self.steps >= self.limits.max_steps {
            return Err(Halt::Budget);
        }
        self.steps += 1;
        Ok(())
    }

    fn call_user(&mut self, f: &'a FunctionDef, args: Vec<Value>) -> Result<Value, Halt> {
        if self.depth >= self.limits.max_call_depth {
            return Err(err(
                ErrorKind::StackOverflow,
                f.span.start,
                &f.name,
                format!("call depth exceeded {} entering `{}`", self.limits.max_call_depth, f.name),
            ));
        }
        self.depth += 1;
        let mut frame = Frame::new();
        for (p, v) in f.params.iter().zip(args) {
            self.observer.var_write(&f.name, f.span.start, p, &v);
            frame.insert(p.clone(), v);
        }
        let result = stacker::maybe_grow(64 * 1024, 4 * 1024 * 1024, || self.exec_block(f, &f.body, &mut frame));
        self.depth -= 1;
        match result? {
            Flow::Return(v) => Ok(v),
            Flow::Normal => Ok(Value::Unit),
        }
    }

    fn exec_block(&mut self, f: &'a FunctionDef, stmts: &'a [Stmt], frame: &mut Frame) -> Result<Flow, Halt> {
        for s in stmts {
            if let Flow::Return(v) = self.exec_stmt(f, s, frame)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Normal)
    }

    fn exec_stmt(&mut self, f: &'a FunctionDef, s: &'a Stmt, frame: &mut Frame) -> Result<Flow, Halt> {
        self.tick()?;
        let fname = f.name.as_str();
        match s {
            Stmt::Let { name, value, line } => {
                let v = self.eval(f, value, frame)?;
                self.observer.var_write(fname, *line, name, &v);
                frame.insert(name.clone(), v);
            }
            Stmt::Assign { target, value, line } => {
                let v = self.eval(f, value, frame)?;
                let mut idx = Vec::with_capacity(target.indices.len());
                for e in &target.indices {
                    idx.push((self.eval(f, e, frame)?, e.line()));
                }
                let Some(slot) = frame.get_mut(&target.name) else {
                    return Err(undefined(&target.name, *line, fname));
                };
                assign_path(slot, &idx, v, fname)?;
                let snapshot = frame[&target.name].clone();
                self.observer.var_write(fname, *line, &target.name, &snapshot);
            }
            Stmt::If { cond, then_body, else_body, line } => {
                let c = self.eval_cond(f, cond, frame, *line)?;
                if c {
                    return self.exec_block(f, then_body, frame);
                } else if let Some(body) = else_body {
                    return self.exec_block(f, body, frame);
                }
            }
            Stmt::While { cond, body, line } => loop {
                if !self.eval_cond(f, cond, frame, *line)? {
                    break;
                }
                if let Flow::Return(v) = self.exec_block(f, body, frame)? {
                    return Ok(Flow::Return(v));
                }
            },
            Stmt::For { var, start, end, body, line } => {
                let lo = self.eval(f, start, frame)?;
                let hi = self.eval(f, end, frame)?;
                let (Value::Int(lo), Value::Int(hi)) = (&lo, &hi) else {
                    return Err(err(
                        ErrorKind::TypeMismatch,
                        *line,
                        fname,
                        format!("for range bounds must be Int, got {} and {}", lo.type_name(), hi.type_name()),
                    ));
                };
                let mut i = *lo;
                while i < *hi {
                    self.tick()?;
                    self.observer.var_write(fname, *line, var, &Value::Int(i));
                    frame.insert(var.clone(), Value::Int(i));
                    if let Flow::Return(v) = self.exec_block(f, body, frame)? {
                        return Ok(Flow::Return(v));
                    }
                    i += 1;
                }
            }
            Stmt::Return { value, .. } => {
                let v = match value {
                    Some(e) => self.eval(f, e, frame)?,
                    None => Value::Unit,
                };
                return Ok(Flow::Return(v));
            }
            Stmt::Expr { expr, .. } => {
                self.eval(f, expr, frame)?;
            }
        }
        Ok(Flow::Normal)
    }

    fn eval_cond(&mut self, f: &'a FunctionDef, cond: &'a Expr, frame: &mut Frame, line: u32) -> Result<bool, Halt> {
        match self.eval(f, cond, frame)? {
            Value::Bool(b) => {
                self.observer.branch(&f.name, line, cond, b);
                Ok(b)
            }
            other => Err(err(
                ErrorKind::TypeMismatch,
                cond.line(),
                &f.name,
                format!("condition must be Bool, got {}", other.type_name()),
            )),
        }
    }

    fn eval(&mut self, f: &'a FunctionDef, e: &'a Expr, frame: &mut Frame) -> Result<Value, Halt> {
        self.tick()?;
        let fname = f.name.as_str();
        match e {
            Expr::Int { value, .. } => Ok(Value::Int(*value)),
            Expr::Float { value, .. } => Ok(Value::Float(*value)),
            Expr::Bool { value, .. } => Ok(Value::Bool(*value)),
            Expr::Str { value, .. } => Ok(Value::Str(value.clone())),
            Expr::Array { items, .. } => {
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    out.push(self.eval(f, item, frame)?);
                }
                Ok(Value::Array(out))
            }
            Expr::Var { name, line } => frame.get(name).cloned().ok_or_else(|| undefined(name, *line, fname)),
            Expr::Index { base, index, line } => {
                let b = self.eval(f, base, frame)?;
                let i = self.eval(f, index, frame)?;
                index_value(&b, &i, *line, fname)
            }
            Expr::Unary { op, operand, line } => {
                let v = self.eval(f, operand, frame)?;
                match (op, v) {
                    (UnaryOp::Neg, Value::Int(i)) => Ok(Value::Int(i.wrapping_neg())),
                    (UnaryOp::Neg, Value::Float(x)) => Ok(Value::Float(-x)),
                    (UnaryOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
                    (op, v) => Err(err(
                        ErrorKind::TypeMismatch,
                        *line,
                        fname,
                        format!("cannot apply `{}` to {}", if *op == UnaryOp::Neg { "-" } else { "!" }, v.type_name()),
                    )),
                }
            }
            Expr::Binary { op: BinaryOp::And, lhs, rhs, line } => {
                if !self.eval_bool(f, lhs, frame, "&&", *line)? {
                    return Ok(Value::Bool(false));
                }
                Ok(Value::Bool(self.eval_bool(f, rhs, frame, "&&", *line)?))
            }
            Expr::Binary { op: BinaryOp::Or, lhs, rhs, line } => {
                if self.eval_bool(f, lhs, frame, "||", *line)? {
                    return Ok(Value::Bool(true));
                }
                Ok(Value::Bool(self.eval_bool(f, rhs, frame, "||", *line)?))
            }
            Expr::Binary { op, lhs, rhs, line } => {
                let l = self.eval(f, lhs, frame)?;
                let r = self.eval(f, rhs, frame)?;
                binary(*op, l, r, *line, fname)
            }
            Expr::Call { callee, args, line } => self.eval_call(f, callee, args, *line, frame),
        }
    }

    fn eval_bool(&mut self, f: &'a FunctionDef, e: &'a Expr, frame: &mut Frame, op: &str, line: u32) -> Result<bool, Halt> {
        match self.eval(f, e, frame)? {
            Value::Bool(b) => Ok(b),
            other => Err(err(
                ErrorKind::TypeMismatch,
                line,
                &f.name,
                format!("operands of `{op}` must be Bool, got {}", other.type_name()),
            )),
        }
    }

    fn eval_call(
        &mut self,
        f: &'a FunctionDef,
        callee: &'a str,
        args: &'a [Expr],
        line: u32,
        frame: &mut Frame,
    ) -> Result<Value, Halt> {
        let fname = f.name.as_str();
        let mut values = Vec::with_capacity(args.len());
        for a in args {
            values.push(self.eval(f, a, frame)?);
        }
        self.observer.call(fname, line, callee, &values);
        let result = if let Some(target) = self.functions.get(callee).copied() {
            if target.params.len() != values.len() {
                return Err(err(
                    ErrorKind::TypeMismatch,
                    line,
                    fname,
                    format!("`{callee}` expects {} arguments, got {}", target.params.len(), values.len()),
                ));
            }
            self.call_user(target, values)?
        } else if let Some(b) = Builtin::lookup(callee) {
            if b == Builtin::Push {
                // push mutates its first argument, which must name a local.
                let Some(Expr::Var { name, .. }) = args.first() else {
                    return Err(err(ErrorKind::TypeMismatch, line, fname, "push expects a variable as its first argument"));
                };
                let item = values.pop().expect("arity checked by resolver");
                let Some(Value::Array(items)) = frame.get_mut(name) else {
                    return Err(err(ErrorKind::TypeMismatch, line, fname, "push expects an Array variable"));
                };
                items.push(item);
                let snapshot = frame[name].clone();
                self.observer.var_write(fname, line, name, &snapshot);
                Value::Unit
            } else {
                builtins::apply(b, values, &mut self.output).map_err(|(kind, message, assertion)| {
                    Halt::Error(RuntimeError { kind, line, function: fname.to_string(), message, assertion })
                })?
            }
        } else {
            return Err(err(ErrorKind::UndefinedVariable, line, fname, format!("undefined function `{callee}`")));
        };
        self.observer.ret(fname, line, callee, &result);
        Ok(result)
    }
}

fn err(kind: ErrorKind, line: u32, function: &str, message: impl Into<String>) -> Halt {
    Halt::Error(RuntimeError { kind, line, function: function.to_string(), message: message.into(), assertion: None })
}

fn undefined(name: &str, line: u32, function: &str) -> Halt {
    err(ErrorKind::UndefinedVariable, line, function, format!("undefined variable `{name}`"))
}

fn bounds_error(index: i64, size: usize, line: u32, function: &str) -> Halt {
    err(ErrorKind::IndexOutOfBounds, line, function, format!("Index:{index}, Size:{size}"))
}

fn index_value(base: &Value, index: &Value, line: u32, function: &str) -> Result<Value, Halt> {
    let Value::Int(i) = index else {
        return Err(err(ErrorKind::TypeMismatch, line, function, format!("index must be Int, got {}", index.type_name())));
    };
    match base {
        Value::Array(items) => {
            if *i < 0 || *i as usize >= items.len() {
                return Err(bounds_error(*i, items.len(), line, function));
            }
            Ok(items[*i as usize].clone())
        }
        Value::Str(s) => {
            let n = s.chars().count();
            if *i < 0 || *i as usize >= n {
                return Err(bounds_error(*i, n, line, function));
            }
            Ok(Value::Str(s.chars().nth(*i as usize).unwrap().to_string()))
        }
        other => Err(err(ErrorKind::TypeMismatch, line, function, format!("cannot index into {}", other.type_name()))),
    }
}

fn assign_path(slot: &mut Value, path: &[(Value, u32)], v: Value, function: &str) -> Result<(), Halt> {
    let Some(((idx, line), rest)) = path.split_first() else {
        *slot = v;
        return Ok(());
    };
    let Value::Int(i) = idx else {
        return Err(err(ErrorKind::TypeMismatch, *line, function, format!("index must be Int, got {}", idx.type_name())));
    };
    let Value::Array(items) = slot else {
        return Err(err(ErrorKind::TypeMismatch, *line, function, format!("cannot index-assign into {}", slot.type_name())));
    };
    if *i < 0 || *i as usize >= items.len() {
        return Err(bounds_error(*i, items.len(), *line, function));
    }
    assign_path(&mut items[*i as usize], rest, v, function)
}

fn binary(op: BinaryOp, l: Value, r: Value, line: u32, function: &str) -> Result<Value, Halt> {
    use BinaryOp::*;
    let mismatch = |l: &Value, r: &Value| {
        err(
            ErrorKind::TypeMismatch,
            line,
            function,
            format!("cannot apply `{op}` to {} and {}", l.type_name(), r.type_name()),
        )
    };
    match op {
        Eq => return Ok(Value::Bool(values_equal(&l, &r))),
        Ne => return Ok(Value::Bool(!values_equal(&l, &r))),
        _ => {}
    }
    match (&l, &r) {
        (Value::Int(a), Value::Int(b)) => {
            let (a, b) = (*a, *b);
            Ok(match op {
                Add => Value::Int(a.wrapping_add(b)),
                Sub => Value::Int(a.wrapping_sub(b)),
                Mul => Value::Int(a.wrapping_mul(b)),
                Div | Rem if b == 0 => {
                    return Err(err(ErrorKind::DivByZero, line, function, "division by zero"));
                }
                Div => Value::Int(a.wrapping_div(b)),
                Rem => Value::Int(a.wrapping_rem(b)),
                Lt => Value::Bool(a < b),
                Le => Value::Bool(a <= b),
                Gt => Value::Bool(a > b),
                Ge => Value::Bool(a >= b),
                _ => return Err(mismatch(&l, &r)),
            })
        }
        (Value::Int(_) | Value::Float(_), Value::Int(_) | Value::Float(_)) => {
            let a = as_f64(&l);
            let b = as_f64(&r);
            Ok(match op {
                Add => Value::Float(a + b),
                Sub => Value::Float(a - b),
                Mul => Value::Float(a * b),
                Div => Value::Float(a / b),
                Rem => Value::Float(a % b),
                Lt => Value::Bool(a < b),
                Le => Value::Bool(a <= b),
                Gt => Value::Bool(a > b),
                Ge => Value::Bool(a >= b),
                _ => return Err(mismatch(&l, &r)),
            })
        }
        (Value::Str(a), Value::Str(b)) => Ok(match op {
            Add => Value::Str(format!("{a}{b}")),
            Lt => Value::Bool(a < b),
            Le => Value::Bool(a <= b),
            Gt => Value::Bool(a > b),
            Ge => Value::Bool(a >= b),
            _ => return Err(mismatch(&l, &r)),
        }),
        (Value::Array(a), Value::Array(b)) if op == Add => {
            let mut out = a.clone();
            out.extend(b.iter().cloned());
            Ok(Value::Array(out))
        }
        _ => Err(mismatch(&l, &r)),
    }
}

fn as_f64(v: &Value) -> f64 {
    match v {
        Value::Int(i) => *i as f64,
        Value::Float(x) => *x,
        _ => unreachable!("numeric operand"),
    }
}

/// Structural equality with Int/Float promotion.
pub fn values_equal(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Int(x), Value::Float(y)) | (Value::Float(y), Value::Int(x)) => (*x as f64) == *y,
        (Value::Array(x), Value::Array(y)) => x.len() == y.len() && x.iter().zip(y).all(|(p, q)| values_equal(p, q)),
        _ => a == b,
    }
}

/// Renders a value the way assertion messages and traces show it.
pub fn repr(v: &Value) -> String {
    v.render(RenderLimits::default())
}
