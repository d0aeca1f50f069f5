//! Static call resolution: every call must name a known function or builtin
//! with a matching argument count.

use std::collections::HashMap;

use super::ast::*;
use super::builtins::Builtin;
use super::ParseError;

/// Checks every call in `functions` against `scope` plus the builtins.
pub fn resolve<'a>(
    functions: impl IntoIterator<Item = &'a FunctionDef>,
    scope: impl IntoIterator<Item = &'a FunctionDef>,
) -> Result<(), ParseError> {
    let arities: HashMap<&str, usize> = scope.into_iter().map(|f| (f.name.as_str(), f.params.len())).collect();
    for f in functions {
        for s in &f.body {
            check_stmt(s, &arities)?;
        }
    }
    Ok(())
}

fn check_stmt(s: &Stmt, arities: &HashMap<&str, usize>) -> Result<(), ParseError> {
    match s {
        Stmt::Let { value, .. } => check_expr(value, arities),
        Stmt::Assign { target, value, .. } => {
            for i in &target.indices {
                check_expr(i, arities)?;
            }
            check_expr(value, arities)
        }
        Stmt::If { cond, then_body, else_body, .. } => {
            check_expr(cond, arities)?;
            for s in then_body.iter().chain(else_body.iter().flatten()) {
                check_stmt(s, arities)?;
            }
            Ok(())
        }
        Stmt::While { cond, body, .. } => {
            check_expr(cond, arities)?;
            body.iter().try_for_each(|s| check_stmt(s, arities))
        }
        Stmt::For { start, end, body, .. } => {
            check_expr(start, arities)?;
            check_expr(end, arities)?;
            body.iter().try_for_each(|s| check_stmt(s, arities))
        }
        Stmt::Return { value, .. } => value.iter().try_for_each(|e| check_expr(e, arities)),
        Stmt::Expr { expr, .. } => check_expr(expr, arities),
    }
}

fn check_expr(e: &Expr, arities: &HashMap<&str, usize>) -> Result<(), ParseError> {
    match e {
        Expr::Int { .. } | Expr::Float { .. } | Expr::Bool { .. } | Expr::Str { .. } | Expr::Var { .. } => Ok(()),
        Expr::Array { items, .. } => items.iter().try_for_each(|i| check_expr(i, arities)),
        Expr::Index { base, index, .. } => {
            check_expr(base, arities)?;
            check_expr(index, arities)
        }
        Expr::Unary { operand, .. } => check_expr(operand, arities),
        Expr::Binary { lhs, rhs, .. } => {
            check_expr(lhs, arities)?;
            check_expr(rhs, arities)
        }
        Expr::Call { callee, args, line } => {
            if let Some(&n) = arities.get(callee.as_str()) {
                if n != args.len() {
                    return Err(ParseError::new(
                        *line,
                        1,
                        format!("`{callee}` expects {n} arguments, found {}", args.len()),
                    ));
                }
            } else if let Some(b) = Builtin::lookup(callee) {
                let (lo, hi) = b.arity();
                if args.len() < lo || args.len() > hi {
                    return Err(ParseError::new(
                        *line,
                        1,
                        format!("builtin `{callee}` takes {lo}..={hi} arguments, found {}", args.len()),
                    ));
                }
                if b == Builtin::Push && !matches!(args.first(), Some(Expr::Var { .. })) {
                    return Err(ParseError::new(*line, 1, "first argument of `push` must be a variable"));
                }
            } else {
                return Err(ParseError::new(*line, 1, format!("call to undefined function `{callee}`")));
            }
            args.iter().try_for_each(|a| check_expr(a, arities))
        }
    }
}
