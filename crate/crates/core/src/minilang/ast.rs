//! Syntax tree for `.mini` programs.
//!
//! Every statement and expression carries the 1-based source line it started
//! on. Structural comparison ([`Program::same_structure`]) ignores lines and
//! the captured source text, so a program and its pretty-printed re-parse
//! compare equal.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub functions: Vec<FunctionDef>,
    pub source_path: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDef {
    pub name: String,
    pub params: Vec<String>,
    pub body: Vec<Stmt>,
    pub span: Span,
    /// Exact source lines `span.start..=span.end` as they appeared when parsed.
    pub text: String,
}

/// Inclusive, 1-based line range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub start: u32,
    pub end: u32,
}

impl Span {
    pub fn contains(&self, line: u32) -> bool {
        self.start <= line && line <= self.end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Let { name: String, value: Expr, line: u32 },
    Assign { target: LValue, value: Expr, line: u32 },
    If { cond: Expr, then_body: Vec<Stmt>, else_body: Option<Vec<Stmt>>, line: u32 },
    While { cond: Expr, body: Vec<Stmt>, line: u32 },
    For { var: String, start: Expr, end: Expr, body: Vec<Stmt>, line: u32 },
    Return { value: Option<Expr>, line: u32 },
    Expr { expr: Expr, line: u32 },
}

impl Stmt {
    pub fn line(&self) -> u32 {
        match self {
            Stmt::Let { line, .. }
            | Stmt::Assign { line, .. }
            | Stmt::If { line, .. }
            | Stmt::While { line, .. }
            | Stmt::For { line, .. }
            | Stmt::Return { line, .. }
            | Stmt::Expr { line, .. } => *line,
        }
    }
}

/// Assignment target: a variable, optionally followed by index accesses.
#[derive(Debug, Clone, PartialEq)]
pub struct LValue {
    pub name: String,
    pub indices: Vec<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Int { value: i64, line: u32 },
    Float { value: f64, line: u32 },
    Bool { value: bool, line: u32 },
    Str { value: String, line: u32 },
    Array { items: Vec<Expr>, line: u32 },
    Var { name: String, line: u32 },
    Index { base: Box<Expr>, index: Box<Expr>, line: u32 },
    Call { callee: String, args: Vec<Expr>, line: u32 },
    Unary { op: UnaryOp, operand: Box<Expr>, line: u32 },
    Binary { op: BinaryOp, lhs: Box<Expr>, rhs: Box<Expr>, line: u32 },
}

impl Expr {
    pub fn line(&self) -> u32 {
        match self {
            Expr::Int { line, .. }
            | Expr::Float { line, .. }
            | Expr::Bool { line, .. }
            | Expr::Str { line, .. }
            | Expr::Array { line, .. }
            | Expr::Var { line, .. }
            | Expr::Index { line, .. }
            | Expr::Call { line, .. }
            | Expr::Unary { line, .. }
            | Expr::Binary { line, .. } => *line,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

impl BinaryOp {
    /// Binding strength; higher binds tighter. All binary operators are left-associative.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Eq | BinaryOp::Ne => 3,
            BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => 4,
            BinaryOp::Add | BinaryOp::Sub => 5,
            BinaryOp::Mul | BinaryOp::Div | BinaryOp::Rem => 6,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Or => "||",
            BinaryOp::And => "&&",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Rem => "%",
        }
    }
}

impl fmt::Display for BinaryOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl Program {
    pub fn empty(source_path: impl Into<String>) -> Self {
        Program { functions: Vec::new(), source_path: source_path.into() }
    }

    pub fn function(&self, name: &str) -> Option<&FunctionDef> {
        self.functions.iter().find(|f| f.name == name)
    }

    /// Equality modulo line numbers, captured text and source path.
    pub fn same_structure(&self, other: &Program) -> bool {
        self.functions.len() == other.functions.len()
            && self.functions.iter().zip(&other.functions).all(|(a, b)| a.same_structure(b))
    }
}

impl FunctionDef {
    pub fn same_structure(&self, other: &FunctionDef) -> bool {
        self.name == other.name
            && self.params == other.params
            && block_eq(&self.body, &other.body)
    }
}

fn block_eq(a: &[Stmt], b: &[Stmt]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| stmt_eq(x, y))
}

fn stmt_eq(a: &Stmt, b: &Stmt) -> bool {
    match (a, b) {
        (Stmt::Let { name: n1, value: v1, .. }, Stmt::Let { name: n2, value: v2, .. }) => {
            n1 == n2 && expr_eq(v1, v2)
        }
        (Stmt::Assign { target: t1, value: v1, .. }, Stmt::Assign { target: t2, value: v2, .. }) => {
            t1.name == t2.name
                && exprs_eq(&t1.indices, &t2.indices)
                && expr_eq(v1, v2)
        }
        (
            Stmt::If { cond: c1, then_body: t1, else_body: e1, .. },
            Stmt::If { cond: c2, then_body: t2, else_body: e2, .. },
        ) => {
            expr_eq(c1, c2)
                && block_eq(t1, t2)
                && match (e1, e2) {
                    (None, None) => true,
                    (Some(x), Some(y)) => block_eq(x, y),
                    _ => false,
                }
        }
        (Stmt::While { cond: c1, body: b1, .. }, Stmt::While { cond: c2, body: b2, .. }) => {
            expr_eq(c1, c2) && block_eq(b1, b2)
        }
        (
            Stmt::For { var: v1, start: s1, end: e1, body: b1, .. },
            Stmt::For { var: v2, start: s2, end: e2, body: b2, .. },
        ) => v1 == v2 && expr_eq(s1, s2) && expr_eq(e1, e2) && block_eq(b1, b2),
        (Stmt::Return { value: v1, .. }, Stmt::Return { value: v2, .. }) => match (v1, v2) {
            (None, None) => true,
            (Some(x), Some(y)) => expr_eq(x, y),
            _ => false,
        },
        (Stmt::Expr { expr: e1, .. }, Stmt::Expr { expr: e2, .. }) => expr_eq(e1, e2),
        _ => false,
    }
}

fn exprs_eq(a: &[Expr], b: &[Expr]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| expr_eq(x, y))
}

fn expr_eq(a: &Expr, b: &Expr) -> bool {
    match (a, b) {
        (Expr::Int { value: x, .. }, Expr::Int { value: y, .. }) => x == y,
        (Expr::Float { value: x, .. }, Expr::Float { value: y, .. }) => x.to_bits() == y.to_bits(),
        (Expr::Bool { value: x, .. }, Expr::Bool { value: y, .. }) => x == y,
        (Expr::Str { value: x, .. }, Expr::Str { value: y, .. }) => x == y,
        (Expr::Array { items: x, .. }, Expr::Array { items: y, .. }) => exprs_eq(x, y),
        (Expr::Var { name: x, .. }, Expr::Var { name: y, .. }) => x == y,
        (Expr::Index { base: b1, index: i1, .. }, Expr::Index { base: b2, index: i2, .. }) => {
            expr_eq(b1, b2) && expr_eq(i1, i2)
        }
        (Expr::Call { callee: c1, args: a1, .. }, Expr::Call { callee: c2, args: a2, .. }) => {
            c1 == c2 && exprs_eq(a1, a2)
        }
        (Expr::Unary { op: o1, operand: x, .. }, Expr::Unary { op: o2, operand: y, .. }) => {
            o1 == o2 && expr_eq(x, y)
        }
        (
            Expr::Binary { op: o1, lhs: l1, rhs: r1, .. },
            Expr::Binary { op: o2, lhs: l2, rhs: r2, .. },
        ) => o1 == o2 && expr_eq(l1, l2) && expr_eq(r1, r2),
        _ => false,
    }
}
