//! A small scalar expression language used by metric and curve specs.
//!
//! Grammar (whitespace is insignificant):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := base ('^' factor)?
//! base   := number | ident | ident '(' args ')' | '(' expr ')' | '-' base
//! ```
//!
//! `^` is right-associative and binds to the *base*, so `-t^2` reads as
//! `(-t)^2`. Write `-(t^2)` or `0 - t^2` for the other meaning.
//!
//! Variables are `t` and `x1` … `x9`; functions are `abs`, `sqrt`, `exp`,
//! `log`, `sin`, `cos`, `min`, `max`.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    /// Chart coordinate `x{i+1}`.
    X(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Abs,
    Sqrt,
    Exp,
    Log,
    Sin,
    Cos,
    Min,
    Max,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    fn variadic(self) -> bool {
        matches!(self, Func::Min | Func::Max)
    }
}

/// Parsed expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Variable bindings for evaluation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Vars<'a> {
    pub t: f64,
    pub x: &'a [f64],
}

impl<'a> Vars<'a> {
    pub fn t(t: f64) -> Self {
        Vars { t, x: &[] }
    }

    pub fn point(x: &'a [f64]) -> Self {
        Vars { t: 0.0, x }
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        parse_expression(src)
    }

    pub fn eval(&self, vars: &Vars<'_>) -> Result<f64> {
        match self {
            Expr::Num(v) => Ok(*v),
            Expr::Var(Var::T) => Ok(vars.t),
            Expr::Var(Var::X(i)) => vars
                .x
                .get(*i as usize)
                .copied()
                .ok_or_else(|| Error::Eval(format!("variable x{} is not bound", i + 1))),
            Expr::Neg(e) => Ok(-e.eval(vars)?),
            Expr::Binary(op, a, b) => {
                let a = a.eval(vars)?;
                let b = b.eval(vars)?;
                match op {
                    BinOp::Add => Ok(a + b),
                    BinOp::Sub => Ok(a - b),
                    BinOp::Mul => Ok(a * b),
                    BinOp::Div => {
                        if b == 0.0 {
                            Err(Error::Eval("division by zero".into()))
                        } else {
                            Ok(a / b)
                        }
                    }
                    BinOp::Pow => Ok(pow(a, b)),
                }
            }
            Expr::Call(f, args) => {
                let first = args[0].eval(vars)?;
                match f {
                    Func::Abs => Ok(first.abs()),
                    Func::Sqrt => {
                        if first < 0.0 {
                            Err(Error::Eval(format!("sqrt of negative value {first}")))
                        } else {
                            Ok(first.sqrt())
                        }
                    }
                    Func::Exp => Ok(first.exp()),
                    Func::Log => {
                        if first <= 0.0 {
                            Err(Error::Eval(format!("log of non-positive value {first}")))
                        } else {
                            Ok(first.ln())
                        }
                    }
                    Func::Sin => Ok(first.sin()),
                    Func::Cos => Ok(first.cos()),
                    Func::Min | Func::Max => {
                        let mut acc = first;
                        for a in &args[1..] {
                            let v = a.eval(vars)?;
                            acc = if *f == Func::Min { acc.min(v) } else { acc.max(v) };
                        }
                        Ok(acc)
                    }
                }
            }
        }
    }

    /// Value of an expression that mentions no variables.
    pub fn constant_value(&self) -> Option<f64> {
        if self.mentions_variables() {
            None
        } else {
            self.eval(&Vars::default()).ok()
        }
    }

    pub fn mentions_variables(&self) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(_) => true,
            Expr::Neg(e) => e.mentions_variables(),
            Expr::Binary(_, a, b) => a.mentions_variables() || b.mentions_variables(),
            Expr::Call(_, args) => args.iter().any(Expr::mentions_variables),
        }
    }

    /// Largest chart coordinate index referenced (1-based), 0 if none.
    pub fn max_coordinate(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Var(Var::T) => 0,
            Expr::Var(Var::X(i)) => *i as usize + 1,
            Expr::Neg(e) => e.max_coordinate(),
            Expr::Binary(_, a, b) => a.max_coordinate().max(b.max_coordinate()),
            Expr::Call(_, args) => args.iter().map(Expr::max_coordinate).max().unwrap_or(0),
        }
    }
}

// Integer exponents go through powi so that (-2)^3 stays finite.
fn pow(a: f64, b: f64) -> f64 {
    if b.fract() == 0.0 && b.abs() <= i32::MAX as f64 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

/// Fully parenthesized rendering; `parse(e.to_string())` reproduces `e`.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(Var::T) => write!(f, "t"),
            Expr::Var(Var::X(i)) => write!(f, "x{}", i + 1),
            Expr::Neg(e) => write!(f, "-({e})"),
            Expr::Binary(op, a, b) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({a} {sym} {b})")
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(Tok, usize)>> {
        let mut lx = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        loop {
            let (tok, at) = lx.next()?;
            let end = tok == Tok::End;
            out.push((tok, at));
            if end {
                return Ok(out);
            }
        }
    }

    fn next(&mut self) -> Result<(Tok, usize)> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = bytes.get(self.pos) else {
            return Ok((Tok::End, start));
        };
        let tok = match c {
            b'0'..=b'9' | b'.' => return self.number(start),
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                while self.pos < bytes.len()
                    && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                return Ok((Tok::Ident(self.src[start..self.pos].to_string()), start));
            }
            b'+' | b'-' | b'*' | b'/' | b'^' => Tok::Op(c as char),
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            _ => {
                let ch = self.src[start..].chars().next().unwrap_or('?');
                return Err(Error::Syntax {
                    offset: start,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        };
        self.pos += 1;
        Ok((tok, start))
    }

    fn number(&mut self, start: usize) -> Result<(Tok, usize)> {
        let bytes = self.src.as_bytes();
        let digits = |pos: &mut usize| {
            let s = *pos;
            while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
                *pos += 1;
            }
            *pos - s
        };
        let mut n = digits(&mut self.pos);
        if self.pos < bytes.len() && bytes[self.pos] == b'.' {
            self.pos += 1;
            n += digits(&mut self.pos);
        }
        if n == 0 {
            return Err(Error::Syntax { offset: start, message: "malformed number".into() });
        }
        if self.pos < bytes.len() && (bytes[self.pos] == b'e' || bytes[self.pos] == b'E') {
            let mark = self.pos;
            self.pos += 1;
            if self.pos < bytes.len() && (bytes[self.pos] == b'+' || bytes[self.pos] == b'-') {
                self.pos += 1;
            }
            if digits(&mut self.pos) == 0 {
                return Err(Error::Syntax { offset: mark, message: "malformed exponent".into() });
            }
        }
        let text = &self.src[start..self.pos];
        let v: f64 = text.parse().map_err(|_| Error::Syntax {
            offset: start,
            message: format!("malformed number `{text}`"),
        })?;
        Ok((Tok::Num(v), start))
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    i: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn offset(&self) -> usize {
        self.toks[self.i].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.i].clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn unexpected<T>(&self) -> Result<T> {
        let message = match self.peek() {
            Tok::End => "unexpected end of input".to_string(),
            t => format!("unexpected token {}", describe(t)),
        };
        Err(Error::Syntax { offset: self.offset(), message })
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        let base = self.base()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let exp = self.factor()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Expr> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::Op('-') => {
                self.bump();
                Ok(Expr::Neg(Box::new(self.base()?)))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                if *self.peek() != Tok::RParen {
                    return self.unexpected();
                }
                self.bump();
                Ok(e)
            }
            Tok::Ident(name) => {
                let at = self.offset();
                self.bump();
                if *self.peek() == Tok::LParen {
                    let func = Func::from_name(&name)
                        .ok_or(Error::UnknownIdentifier { name: name.clone(), offset: at })?;
                    self.bump();
                    let mut args = vec![self.expr()?];
                    while *self.peek() == Tok::Comma {
                        self.bump();
                        args.push(self.expr()?);
                    }
                    if *self.peek() != Tok::RParen {
                        return self.unexpected();
                    }
                    self.bump();
                    if !func.variadic() && args.len() != 1 {
                        return Err(Error::Syntax {
                            offset: at,
                            message: format!("{name} takes one argument, got {}", args.len()),
                        });
                    }
                    return Ok(Expr::Call(func, args));
                }
                variable(&name).map(Expr::Var).ok_or(Error::UnknownIdentifier { name, offset: at })
            }
            _ => self.unexpected(),
        }
    }
}

fn variable(name: &str) -> Option<Var> {
    if name == "t" {
        return Some(Var::T);
    }
    let rest = name.strip_prefix('x')?;
    match rest.as_bytes() {
        [d @ b'1'..=b'9'] => Some(Var::X(d - b'1')),
        _ => None,
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Op(c) => format!("`{c}`"),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::End => "end of input".into(),
    }
}

pub fn parse_expression(src: &str) -> Result<Expr> {
    if src.trim().is_empty() {
        return Err(Error::Syntax { offset: 0, message: "empty expression".into() });
    }
    let toks = Lexer::tokens(src)?;
    let mut p = Parser { toks, i: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.unexpected();
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(src: &str, x: &[f64]) -> f64 {
        parse_expression(src).unwrap().eval(&Vars::point(x)).unwrap()
    }

    #[test]
    fn evaluates_examples() {
        assert_eq!(at("1 + abs(x1)", &[-2.0]), 3.0);
        assert!((at("exp(x1)^2", &[0.5]) - std::f64::consts::E).abs() < 1e-15);
        assert_eq!(at("2^3^2", &[]), 512.0);
        assert_eq!(at("max(1, x1, 3)", &[7.0]), 7.0);
        assert_eq!(at("min(x1, x2)", &[1.0, -4.0]), -4.0);
        assert_eq!(at("-2^2", &[]), 4.0);
        assert_eq!(at("-(2^2)", &[]), -4.0);
        assert_eq!(at("1.5e1 / 3", &[]), 5.0);
        let e = parse_expression("t * 2").unwrap();
        assert_eq!(e.eval(&Vars::t(0.25)).unwrap(), 0.5);
    }

    #[test]
    fn reports_syntax_offset() {
        match parse_expression("1 + * x1") {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("expected syntax error, got {other:?}"),
        }
        match parse_expression("(1 + 2") {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 6),
            other => panic!("expected syntax error, got {other:?}"),
        }
        assert!(matches!(parse_expression("   "), Err(Error::Syntax { .. })));
        assert!(matches!(parse_expression("1e"), Err(Error::Syntax { offset: 1, .. })));
        assert!(matches!(parse_expression("sin(1, 2)"), Err(Error::Syntax { .. })));
    }

    #[test]
    fn rejects_unknown_identifiers() {
        assert!(matches!(
            parse_expression("y + 1"),
            Err(Error::UnknownIdentifier { offset: 0, .. })
        ));
        assert!(matches!(
            parse_expression("1 + foo(2)"),
            Err(Error::UnknownIdentifier { offset: 4, .. })
        ));
        assert!(matches!(parse_expression("x0"), Err(Error::UnknownIdentifier { .. })));
        assert!(matches!(parse_expression("x10"), Err(Error::UnknownIdentifier { .. })));
    }

    #[test]
    fn evaluation_errors() {
        let vars = Vars::point(&[-1.0]);
        for src in ["sqrt(x1)", "log(x1 + 1)", "1 / (x1 + 1)", "x2"] {
            let e = parse_expression(src).unwrap();
            assert!(matches!(e.eval(&vars), Err(Error::Eval(_))), "{src}");
        }
    }

    #[test]
    fn display_reparses() {
        for src in ["1 + abs(x1)", "-x1^2 * 3 - t / 2", "max(x1, -x2, 0.5)", "2^-t^2"] {
            let e = parse_expression(src).unwrap();
            assert_eq!(parse_expression(&e.to_string()).unwrap(), e, "{src}");
        }
    }

    #[test]
    fn constant_detection() {
        assert_eq!(parse_expression("2 * 3").unwrap().constant_value(), Some(6.0));
        assert_eq!(parse_expression("x1").unwrap().constant_value(), None);
        assert_eq!(parse_expression("x3 + x1").unwrap().max_coordinate(), 3);
    }
}
