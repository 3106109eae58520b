//! Infix expression language for space-time media.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?
//! atom    := number | ident | ident '(' sum (',' sum)* ')' | '(' sum ')'
//! ```
//!
//! `^` is right associative and binds tighter than unary minus, so `-x^2`
//! is `-(x^2)` while `2^-1` is `2^(-1)`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("function `{name}` at offset {offset} expects {expected} argument(s), got {found}")]
    Arity {
        offset: usize,
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("empty expression")]
    Empty,
}

impl ParseError {
    pub fn offset(&self) -> Option<usize> {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::Arity { offset, .. } => Some(*offset),
            ParseError::Empty => None,
        }
    }
}

/// Variables a medium may reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    /// Spatial coordinate, zero based (`x1` is `Space(0)`).
    Space(usize),
    Time,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
    Min,
    Max,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Pi,
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    /// Evaluates at spatial point `x` and time `t`. Coordinates beyond
    /// `x.len()` read as zero.
    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Pi => std::f64::consts::PI,
            Expr::Var(Var::Time) => t,
            Expr::Var(Var::Space(i)) => x.get(*i).copied().unwrap_or(0.0),
            Expr::Neg(e) => -e.eval(x, t),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(x, t), b.eval(x, t));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => {
                        if b == 2.0 {
                            a * a
                        } else {
                            a.powf(b)
                        }
                    }
                }
            }
            Expr::Call(f, args) => {
                let a = args[0].eval(x, t);
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Sqrt => a.sqrt(),
                    Func::Abs => a.abs(),
                    Func::Min => a.min(args[1].eval(x, t)),
                    Func::Max => a.max(args[1].eval(x, t)),
                }
            }
        }
    }

    /// Largest spatial index referenced, plus one.
    pub fn spatial_extent(&self) -> usize {
        match self {
            Expr::Var(Var::Space(i)) => i + 1,
            Expr::Num(_) | Expr::Pi | Expr::Var(Var::Time) => 0,
            Expr::Neg(e) => e.spatial_extent(),
            Expr::Bin(_, a, b) => a.spatial_extent().max(b.spatial_extent()),
            Expr::Call(_, args) => args.iter().map(Expr::spatial_extent).max().unwrap_or(0),
        }
    }

    pub fn uses_time(&self) -> bool {
        match self {
            Expr::Var(Var::Time) => true,
            Expr::Num(_) | Expr::Pi | Expr::Var(Var::Space(_)) => false,
            Expr::Neg(e) => e.uses_time(),
            Expr::Bin(_, a, b) => a.uses_time() || b.uses_time(),
            Expr::Call(_, args) => args.iter().any(Expr::uses_time),
        }
    }
}

/// Fully parenthesized rendering; parsing the output yields the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) {
                    // only reachable for hand-built trees
                    write!(f, "(0-{:?})", -v)
                } else {
                    write!(f, "{v:?}")
                }
            }
            Expr::Pi => f.write_str("pi"),
            Expr::Var(Var::Time) => f.write_str("t"),
            Expr::Var(Var::Space(i)) => write!(f, "x{}", i + 1),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Bin(op, a, b) => write!(f, "({a}{}{b})", op.symbol()),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
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
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                out.push((i, Tok::Op(c as char)));
                i += 1;
            }
            b'(' => {
                out.push((i, Tok::LParen));
                i += 1;
            }
            b')' => {
                out.push((i, Tok::RParen));
                i += 1;
            }
            b',' => {
                out.push((i, Tok::Comma));
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| ParseError::Syntax {
                    offset: start,
                    message: format!("malformed number `{text}`"),
                })?;
                out.push((start, Tok::Num(v)));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(src[start..i].to_string())));
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax {
                    offset: i,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    dim: usize,
    _src: &'a str,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(o, _)| *o).unwrap_or(self.end)
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' { BinOp::Add } else { BinOp::Sub };
            self.pos += 1;
            let rhs = self.product()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' { BinOp::Mul } else { BinOp::Div };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if let Some(Tok::Op('-')) = self.peek() {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset();
        let Some(tok) = self.peek().cloned() else {
            return self.syntax("unexpected end of input");
        };
        match tok {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.pos += 1;
                let e = self.sum()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.pos += 1;
                if let Some(Tok::LParen) = self.peek() {
                    let Some(func) = Func::from_name(&name) else {
                        return Err(ParseError::UnknownIdentifier { offset, name });
                    };
                    self.pos += 1;
                    let mut args = vec![self.sum()?];
                    while let Some(Tok::Comma) = self.peek() {
                        self.pos += 1;
                        args.push(self.sum()?);
                    }
                    self.expect_rparen()?;
                    if args.len() != func.arity() {
                        return Err(ParseError::Arity {
                            offset,
                            name,
                            expected: func.arity(),
                            found: args.len(),
                        });
                    }
                    return Ok(Expr::Call(func, args));
                }
                self.variable(&name, offset)
            }
            _ => self.syntax("expected a number, variable, function call or `(`"),
        }
    }

    fn variable(&self, name: &str, offset: usize) -> Result<Expr, ParseError> {
        let unknown = || ParseError::UnknownIdentifier {
            offset,
            name: name.to_string(),
        };
        match name {
            "t" => Ok(Expr::Var(Var::Time)),
            "pi" => Ok(Expr::Pi),
            "x" if self.dim <= 2 => Ok(Expr::Var(Var::Space(0))),
            "y" if self.dim == 2 => Ok(Expr::Var(Var::Space(1))),
            _ => {
                let idx = name
                    .strip_prefix('x')
                    .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
                    .and_then(|d| d.parse::<usize>().ok())
                    .ok_or_else(unknown)?;
                if idx == 0 || idx > self.dim {
                    return Err(unknown());
                }
                Ok(Expr::Var(Var::Space(idx - 1)))
            }
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::RParen) => {
                self.pos += 1;
                Ok(())
            }
            _ => self.syntax("expected `)`"),
        }
    }
}

/// Parses `src` as a medium over spatial dimension `dim`.
pub fn parse(src: &str, dim: usize) -> Result<Expr, ParseError> {
    if src.trim().is_empty() {
        return Err(ParseError::Empty);
    }
    let toks = tokenize(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: src.len(),
        dim,
        _src: src,
    };
    let e = p.sum()?;
    if p.pos < p.toks.len() {
        return p.syntax("unexpected trailing input");
    }
    Ok(e)
}
