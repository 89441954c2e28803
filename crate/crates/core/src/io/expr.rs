//! A small arithmetic language for prescribed fields over `(xi1, xi2)`.
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | name | name '(' expr ')' | '(' expr ')'
//! ```
//!
//! Names are `xi1`, `xi2`, `A0`, `pi`, `e`; functions are `log`, `exp`,
//! `sin`, `cos`, `sqrt`.

use std::fmt;

use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq)]
#[error("column {column}: {message}")]
pub struct ExprError {
    /// 1-based column within the expression text.
    pub column: usize,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Log,
    Exp,
    Sin,
    Cos,
    Sqrt,
}

impl Func {
    fn parse(name: &str) -> Option<Func> {
        Some(match name {
            "log" => Func::Log,
            "exp" => Func::Exp,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Log => x.ln(),
            Func::Exp => x.exp(),
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Sqrt => x.sqrt(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Log => "log",
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Number(f64),
    Xi(usize),
    Endpoint,
    Neg(Box<Expr>),
    Binary(char, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr, ExprError> {
        let tokens = lex(text)?;
        let mut p = Parser { tokens, pos: 0, end: text.chars().count() + 1 };
        let e = p.expr()?;
        match p.peek() {
            None => Ok(e),
            Some(t) => Err(p.error_at(t.column, format!("unexpected {}", t.kind))),
        }
    }

    pub fn eval(&self, xi: [f64; 2], a0: f64) -> f64 {
        match self {
            Expr::Number(v) => *v,
            Expr::Xi(d) => xi[*d],
            Expr::Endpoint => a0,
            Expr::Neg(e) => -e.eval(xi, a0),
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.eval(xi, a0), b.eval(xi, a0));
                match op {
                    '+' => a + b,
                    '-' => a - b,
                    '*' => a * b,
                    '/' => a / b,
                    _ => a.powf(b),
                }
            }
            Expr::Call(f, e) => f.apply(e.eval(xi, a0)),
        }
    }

    pub fn uses_endpoint(&self) -> bool {
        match self {
            Expr::Endpoint => true,
            Expr::Number(_) | Expr::Xi(_) => false,
            Expr::Neg(e) | Expr::Call(_, e) => e.uses_endpoint(),
            Expr::Binary(_, a, b) => a.uses_endpoint() || b.uses_endpoint(),
        }
    }
}

/// Fully parenthesized form, which parses back to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Number(v) => write!(f, "{v:?}"),
            Expr::Xi(d) => write!(f, "xi{}", d + 1),
            Expr::Endpoint => write!(f, "A0"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Binary(op, a, b) => write!(f, "({a} {op} {b})"),
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    Number(f64),
    Name(String),
    Op(char),
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kind::Number(v) => write!(f, "number {v}"),
            Kind::Name(n) => write!(f, "name `{n}`"),
            Kind::Op(c) => write!(f, "`{c}`"),
        }
    }
}

#[derive(Clone, Debug)]
struct Token {
    kind: Kind,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ExprError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s.parse::<f64>().map_err(|_| ExprError {
                column,
                message: format!("malformed number `{s}`"),
            })?;
            out.push(Token { kind: Kind::Number(v), column });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                kind: Kind::Name(chars[start..i].iter().collect()),
                column,
            });
        } else if "+-*/^()".contains(c) {
            out.push(Token { kind: Kind::Op(c), column });
            i += 1;
        } else {
            return Err(ExprError {
                column,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn error_at(&self, column: usize, message: String) -> ExprError {
        ExprError { column, message }
    }

    fn eat_op(&mut self, ops: &str) -> Option<char> {
        match self.peek() {
            Some(Token { kind: Kind::Op(c), .. }) if ops.contains(*c) => {
                let c = *c;
                self.pos += 1;
                Some(c)
            }
            _ => None,
        }
    }

    fn expect_op(&mut self, op: char) -> Result<(), ExprError> {
        if self.eat_op(&op.to_string()).is_some() {
            return Ok(());
        }
        let column = self.peek().map_or(self.end, |t| t.column);
        Err(self.error_at(column, format!("expected `{op}`")))
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        while let Some(op) = self.eat_op("+-") {
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(self.term()?));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.eat_op("*/") {
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat_op("-").is_some() {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        let base = self.atom()?;
        if self.eat_op("^").is_some() {
            return Ok(Expr::Binary('^', Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.error_at(self.end, "unexpected end of expression".into()));
        };
        self.pos += 1;
        match tok.kind {
            Kind::Number(v) => Ok(Expr::Number(v)),
            Kind::Op('(') => {
                let e = self.expr()?;
                self.expect_op(')')?;
                Ok(e)
            }
            Kind::Name(name) => {
                if let Some(f) = Func::parse(&name) {
                    self.expect_op('(')?;
                    let e = self.expr()?;
                    self.expect_op(')')?;
                    return Ok(Expr::Call(f, Box::new(e)));
                }
                match name.as_str() {
                    "xi1" => Ok(Expr::Xi(0)),
                    "xi2" => Ok(Expr::Xi(1)),
                    "A0" => Ok(Expr::Endpoint),
                    "pi" => Ok(Expr::Number(std::f64::consts::PI)),
                    "e" => Ok(Expr::Number(std::f64::consts::E)),
                    _ => Err(self.error_at(tok.column, format!("unknown name `{name}`"))),
                }
            }
            kind => Err(self.error_at(tok.column, format!("unexpected {kind}"))),
        }
    }
}
