//! Recursive-descent parser. Produces a syntactically valid [`Program`];
//! name resolution lives in [`super::resolve`].

use std::collections::HashSet;

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;

/// Parses source text without resolving calls.
pub fn parse_unresolved(src: &str, source_path: &str) -> Result<Program, ParseError> {
    let tokens = tokenize(src)?;
    let lines: Vec<&str> = src.split('\n').collect();
    let mut p = Parser { tokens, pos: 0 };
    let mut functions: Vec<FunctionDef> = Vec::new();
    let mut seen = HashSet::new();
    while p.peek() != &Tok::Eof {
        let start_tok = p.current().clone();
        let mut f = p.function()?;
        if !seen.insert(f.name.clone()) {
            return Err(ParseError::new(
                start_tok.line,
                start_tok.col,
                format!("duplicate function `{}`", f.name),
            ));
        }
        let (s, e) = (f.span.start as usize, f.span.end as usize);
        f.text = lines[s - 1..e].join("\n");
        functions.push(f);
    }
    Ok(Program { functions, source_path: source_path.to_string() })
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn current(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, msg: impl Into<String>) -> ParseError {
        let t = self.current();
        ParseError::new(t.line, t.col, msg)
    }

    fn expect(&mut self, want: Tok, ctx: &str) -> Result<Token, ParseError> {
        if *self.peek() == want {
            Ok(self.advance())
        } else {
            let found = self.peek().describe();
            Err(self.error_here(format!("expected {} {ctx}, found {found}", Tok::describe(&want))))
        }
    }

    fn ident(&mut self, ctx: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.advance();
                Ok(name)
            }
            other => Err(self.error_here(format!("expected identifier {ctx}, found {}", other.describe()))),
        }
    }

    fn function(&mut self) -> Result<FunctionDef, ParseError> {
        let fn_tok = self.expect(Tok::Fn, "at top level")?;
        let name = self.ident("after `fn`")?;
        self.expect(Tok::LParen, "after function name")?;
        let mut params: Vec<String> = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                let t = self.current().clone();
                let p = self.ident("in parameter list")?;
                if params.contains(&p) {
                    return Err(ParseError::new(t.line, t.col, format!("duplicate parameter `{p}`")));
                }
                params.push(p);
                if *self.peek() == Tok::Comma {
                    self.advance();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "to close parameter list")?;
        let (body, end_line) = self.block()?;
        Ok(FunctionDef {
            name,
            params,
            body,
            span: Span { start: fn_tok.line, end: end_line },
            text: String::new(),
        })
    }

    /// Returns the statements and the line of the closing brace.
    fn block(&mut self) -> Result<(Vec<Stmt>, u32), ParseError> {
        self.expect(Tok::LBrace, "to open block")?;
        let mut stmts = Vec::new();
        while *self.peek() != Tok::RBrace {
            if *self.peek() == Tok::Eof {
                return Err(self.error_here("unclosed block, found end of input"));
            }
            stmts.push(self.statement()?);
        }
        let close = self.advance();
        Ok((stmts, close.line))
    }

    fn statement(&mut self) -> Result<Stmt, ParseError> {
        let line = self.current().line;
        match self.peek() {
            Tok::Let => {
                self.advance();
                let name = self.ident("after `let`")?;
                self.expect(Tok::Assign, "in let binding")?;
                let value = self.expr()?;
                self.expect(Tok::Semi, "after let binding")?;
                Ok(Stmt::Let { name, value, line })
            }
            Tok::If => self.if_stmt(),
            Tok::While => {
                self.advance();
                let cond = self.expr()?;
                let (body, _) = self.block()?;
                Ok(Stmt::While { cond, body, line })
            }
            Tok::For => {
                self.advance();
                let var = self.ident("after `for`")?;
                self.expect(Tok::In, "in for loop")?;
                let start = self.expr()?;
                self.expect(Tok::DotDot, "in for range")?;
                let end = self.expr()?;
                let (body, _) = self.block()?;
                Ok(Stmt::For { var, start, end, body, line })
            }
            Tok::Return => {
                self.advance();
                let value = if *self.peek() == Tok::Semi { None } else { Some(self.expr()?) };
                self.expect(Tok::Semi, "after return")?;
                Ok(Stmt::Return { value, line })
            }
            _ => {
                let start = self.current().clone();
                let expr = self.expr()?;
                if *self.peek() == Tok::Assign {
                    self.advance();
                    let target = into_lvalue(expr).ok_or_else(|| {
                        ParseError::new(start.line, start.col, "invalid assignment target")
                    })?;
                    let value = self.expr()?;
                    self.expect(Tok::Semi, "after assignment")?;
                    Ok(Stmt::Assign { target, value, line })
                } else {
                    self.expect(Tok::Semi, "after expression")?;
                    Ok(Stmt::Expr { expr, line })
                }
            }
        }
    }

    fn if_stmt(&mut self) -> Result<Stmt, ParseError> {
        let line = self.expect(Tok::If, "")?.line;
        let cond = self.expr()?;
        let (then_body, _) = self.block()?;
        let else_body = if *self.peek() == Tok::Else {
            self.advance();
            if *self.peek() == Tok::If {
                Some(vec![self.if_stmt()?])
            } else {
                Some(self.block()?.0)
            }
        } else {
            None
        };
        Ok(Stmt::If { cond, then_body, else_body, line })
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.binary(1)
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(op) = binop(self.peek()) {
            if op.precedence() < min_prec {
                break;
            }
            let line = self.advance().line;
            let rhs = self.binary(op.precedence() + 1)?;
            lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs), line };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        let op = match self.peek() {
            Tok::Minus => UnaryOp::Neg,
            Tok::Bang => UnaryOp::Not,
            _ => return self.postfix(),
        };
        let line = self.advance().line;
        let operand = self.unary()?;
        Ok(Expr::Unary { op, operand: Box::new(operand), line })
    }

    fn postfix(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.primary()?;
        while *self.peek() == Tok::LBracket {
            let line = self.advance().line;
            let index = self.expr()?;
            self.expect(Tok::RBracket, "to close index")?;
            e = Expr::Index { base: Box::new(e), index: Box::new(index), line };
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let t = self.current().clone();
        let line = t.line;
        match t.tok {
            Tok::Int(value) => {
                self.advance();
                Ok(Expr::Int { value, line })
            }
            Tok::Float(value) => {
                self.advance();
                Ok(Expr::Float { value, line })
            }
            Tok::True | Tok::False => {
                self.advance();
                Ok(Expr::Bool { value: t.tok == Tok::True, line })
            }
            Tok::Str(value) => {
                self.advance();
                Ok(Expr::Str { value, line })
            }
            Tok::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(Tok::RParen, "to close parenthesis")?;
                Ok(e)
            }
            Tok::LBracket => {
                self.advance();
                let items = self.list(Tok::RBracket)?;
                Ok(Expr::Array { items, line })
            }
            Tok::Ident(name) => {
                self.advance();
                if *self.peek() == Tok::LParen {
                    self.advance();
                    let args = self.list(Tok::RParen)?;
                    Ok(Expr::Call { callee: name, args, line })
                } else {
                    Ok(Expr::Var { name, line })
                }
            }
            other => Err(self.error_here(format!("expected expression, found {}", other.describe()))),
        }
    }

    fn list(&mut self, close: Tok) -> Result<Vec<Expr>, ParseError> {
        let mut items = Vec::new();
        if *self.peek() != close {
            loop {
                items.push(self.expr()?);
                if *self.peek() == Tok::Comma {
                    self.advance();
                } else {
                    break;
                }
            }
        }
        self.expect(close, "to close list")?;
        Ok(items)
    }
}

fn binop(t: &Tok) -> Option<BinaryOp> {
    Some(match t {
        Tok::OrOr => BinaryOp::Or,
        Tok::AndAnd => BinaryOp::And,
        Tok::EqEq => BinaryOp::Eq,
        Tok::NotEq => BinaryOp::Ne,
        Tok::Lt => BinaryOp::Lt,
        Tok::Le => BinaryOp::Le,
        Tok::Gt => BinaryOp::Gt,
        Tok::Ge => BinaryOp::Ge,
        Tok::Plus => BinaryOp::Add,
        Tok::Minus => BinaryOp::Sub,
        Tok::Star => BinaryOp::Mul,
        Tok::Slash => BinaryOp::Div,
        Tok::Percent => BinaryOp::Rem,
        _ => return None,
    })
}

fn into_lvalue(e: Expr) -> Option<LValue> {
    let mut indices = Vec::new();
    let mut cur = e;
    loop {
        match cur {
            Expr::Var { name, .. } => {
                indices.reverse();
                return Some(LValue { name, indices });
            }
            Expr::Index { base, index, .. } => {
                indices.push(*index);
                cur = *base;
            }
            _ => return None,
        }
    }
}
