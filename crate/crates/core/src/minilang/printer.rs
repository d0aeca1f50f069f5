//! Canonical pretty-printer. Output re-parses to a structurally identical
//! program; parentheses are emitted only where precedence requires them.

use super::ast::*;

const INDENT: &str = "    ";

pub fn print_program(program: &Program) -> String {
    let mut out = String::new();
    for (i, f) in program.functions.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&print_function(f));
    }
    out
}

/// Prints one function definition, terminated by a newline.
pub fn print_function(f: &FunctionDef) -> String {
    let mut out = format!("fn {}({}) {{\n", f.name, f.params.join(", "));
    print_block(&f.body, 1, &mut out);
    out.push_str("}\n");
    out
}

fn print_block(stmts: &[Stmt], depth: usize, out: &mut String) {
    for s in stmts {
        print_stmt(s, depth, out);
    }
}

fn indent(depth: usize, out: &mut String) {
    for _ in 0..depth {
        out.push_str(INDENT);
    }
}

fn print_stmt(s: &Stmt, depth: usize, out: &mut String) {
    indent(depth, out);
    match s {
        Stmt::Let { name, value, .. } => {
            out.push_str(&format!("let {name} = {};\n", print_expr(value)));
        }
        Stmt::Assign { target, value, .. } => {
            out.push_str(&target.name);
            for idx in &target.indices {
                out.push_str(&format!("[{}]", print_expr(idx)));
            }
            out.push_str(&format!(" = {};\n", print_expr(value)));
        }
        Stmt::If { .. } => {
            print_if(s, depth, out);
            out.push('\n');
        }
        Stmt::While { cond, body, .. } => {
            out.push_str(&format!("while ({}) {{\n", print_expr(cond)));
            print_block(body, depth + 1, out);
            indent(depth, out);
            out.push_str("}\n");
        }
        Stmt::For { var, start, end, body, .. } => {
            out.push_str(&format!("for {var} in {}..{} {{\n", print_expr(start), print_expr(end)));
            print_block(body, depth + 1, out);
            indent(depth, out);
            out.push_str("}\n");
        }
        Stmt::Return { value: Some(v), .. } => out.push_str(&format!("return {};\n", print_expr(v))),
        Stmt::Return { value: None, .. } => out.push_str("return;\n"),
        Stmt::Expr { expr, .. } => out.push_str(&format!("{};\n", print_expr(expr))),
    }
}

// Writes `if (..) { .. } else ..` without the trailing newline; assumes the
// leading indent is already written.
fn print_if(s: &Stmt, depth: usize, out: &mut String) {
    let Stmt::If { cond, then_body, else_body, .. } = s else { unreachable!() };
    out.push_str(&format!("if ({}) {{\n", print_expr(cond)));
    print_block(then_body, depth + 1, out);
    indent(depth, out);
    out.push('}');
    match else_body.as_deref() {
        None => {}
        Some([nested @ Stmt::If { .. }]) => {
            out.push_str(" else ");
            print_if(nested, depth, out);
        }
        Some(body) => {
            out.push_str(" else {\n");
            print_block(body, depth + 1, out);
            indent(depth, out);
            out.push('}');
        }
    }
}

pub fn print_expr(e: &Expr) -> String {
    match e {
        Expr::Int { value, .. } => value.to_string(),
        Expr::Float { value, .. } => format_float(*value),
        Expr::Bool { value, .. } => value.to_string(),
        Expr::Str { value, .. } => quote_str(value),
        Expr::Array { items, .. } => {
            format!("[{}]", items.iter().map(print_expr).collect::<Vec<_>>().join(", "))
        }
        Expr::Var { name, .. } => name.clone(),
        Expr::Index { base, index, .. } => {
            let b = match **base {
                Expr::Binary { .. } | Expr::Unary { .. } => format!("({})", print_expr(base)),
                _ => print_expr(base),
            };
            format!("{b}[{}]", print_expr(index))
        }
        Expr::Call { callee, args, .. } => {
            format!("{callee}({})", args.iter().map(print_expr).collect::<Vec<_>>().join(", "))
        }
        Expr::Unary { op, operand, .. } => {
            let sym = match op {
                UnaryOp::Neg => "-",
                UnaryOp::Not => "!",
            };
            match **operand {
                Expr::Binary { .. } => format!("{sym}({})", print_expr(operand)),
                _ => format!("{sym}{}", print_expr(operand)),
            }
        }
        Expr::Binary { op, lhs, rhs, .. } => {
            let prec = op.precedence();
            let l = wrap(lhs, |p| p < prec);
            let r = wrap(rhs, |p| p <= prec);
            format!("{l} {op} {r}")
        }
    }
}

fn wrap(e: &Expr, needs_parens: impl Fn(u8) -> bool) -> String {
    match e {
        Expr::Binary { op, .. } if needs_parens(op.precedence()) => format!("({})", print_expr(e)),
        _ => print_expr(e),
    }
}

/// Shortest round-trip representation; always distinguishable from an integer.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

pub fn quote_str(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}
