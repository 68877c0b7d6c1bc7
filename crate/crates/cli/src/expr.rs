//! Closed-form coordinate expressions for field specifications.
//!
//! Configuration values such as `f = sin(3.1*x)*min(x, 1-x)` are parsed
//! once into a small syntax tree and then evaluated at every grid node.
//! The grammar covers real literals (including scientific notation), the
//! coordinate variables `x` and `y` (the latter only on 2-dimensional
//! grids), the binary operators `+ - * / ^` with the usual precedence
//! (`^` binds tightest and associates to the right), unary minus, and
//! the functions `sin`, `cos`, `exp`, `abs` (one argument) and `min`,
//! `max` (two arguments).

use std::fmt;

use thiserror::Error;

/// Parse failures, positioned by 1-based column within the expression.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("column {column}: {message}")]
pub struct ExprError {
    /// 1-based character position of the offending token.
    pub column: usize,
    /// What went wrong.
    pub message: String,
}

impl ExprError {
    fn new(column: usize, message: impl Into<String>) -> Self {
        Self { column, message: message.into() }
    }
}

/// Binary arithmetic operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// One-argument functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fun1 {
    Sin,
    Cos,
    Exp,
    Abs,
}

/// Two-argument functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fun2 {
    Min,
    Max,
}

/// A parsed expression over the node coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    /// A real literal.
    Const(f64),
    /// Coordinate component: 0 is `x`, 1 is `y`.
    Coord(usize),
    /// Unary negation.
    Neg(Box<Expr>),
    /// A binary arithmetic node.
    Bin(BinOp, Box<Expr>, Box<Expr>),
    /// A one-argument function call.
    Call1(Fun1, Box<Expr>),
    /// A two-argument function call.
    Call2(Fun2, Box<Expr>, Box<Expr>),
}

impl Expr {
    /// Evaluate at a node coordinate slice (length equals the grid
    /// dimension the expression was parsed for).
    pub fn eval(&self, coords: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Coord(i) => coords[*i],
            Expr::Neg(e) => -e.eval(coords),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(coords), b.eval(coords));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => a.powf(b),
                }
            }
            Expr::Call1(f, e) => {
                let v = e.eval(coords);
                match f {
                    Fun1::Sin => v.sin(),
                    Fun1::Cos => v.cos(),
                    Fun1::Exp => v.exp(),
                    Fun1::Abs => v.abs(),
                }
            }
            Expr::Call2(f, a, b) => {
                let (a, b) = (a.eval(coords), b.eval(coords));
                match f {
                    Fun2::Min => a.min(b),
                    Fun2::Max => a.max(b),
                }
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Coord(0) => write!(f, "x"),
            Expr::Coord(_) => write!(f, "y"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Bin(op, a, b) => {
                let op = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({a} {op} {b})")
            }
            Expr::Call1(fun, e) => {
                let name = match fun {
                    Fun1::Sin => "sin",
                    Fun1::Cos => "cos",
                    Fun1::Exp => "exp",
                    Fun1::Abs => "abs",
                };
                write!(f, "{name}({e})")
            }
            Expr::Call2(fun, a, b) => {
                let name = match fun {
                    Fun2::Min => "min",
                    Fun2::Max => "max",
                };
                write!(f, "{name}({a}, {b})")
            }
        }
    }
}

/// A lexed token with its 1-based starting column.
#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Name(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

fn lex(src: &str) -> Result<Vec<(Token, usize)>, ExprError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0usize;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        match c {
            ' ' | '\t' => i += 1,
            '+' => {
                out.push((Token::Plus, col));
                i += 1;
            }
            '-' => {
                out.push((Token::Minus, col));
                i += 1;
            }
            '*' => {
                out.push((Token::Star, col));
                i += 1;
            }
            '/' => {
                out.push((Token::Slash, col));
                i += 1;
            }
            '^' => {
                out.push((Token::Caret, col));
                i += 1;
            }
            '(' => {
                out.push((Token::LParen, col));
                i += 1;
            }
            ')' => {
                out.push((Token::RParen, col));
                i += 1;
            }
            ',' => {
                out.push((Token::Comma, col));
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                if i < chars.len() && chars[i] == '.' {
                    i += 1;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
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
                let text: String = chars[start..i].iter().collect();
                let value: f64 = text.parse().map_err(|_| {
                    ExprError::new(col, format!("unparsable number '{text}'"))
                })?;
                if !value.is_finite() {
                    return Err(ExprError::new(col, format!("number '{text}' overflows")));
                }
                out.push((Token::Num(value), col));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_ascii_alphanumeric() || chars[i] == '_')
                {
                    i += 1;
                }
                let name: String = chars[start..i].iter().collect();
                out.push((Token::Name(name), col));
            }
            other => {
                return Err(ExprError::new(col, format!("unexpected character '{other}'")));
            }
        }
    }
    Ok(out)
}

/// Recursive-descent parser over the token stream.
struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
    dim: usize,
    end_column: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn column(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end_column, |(_, c)| *c)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Token, what: &str) -> Result<(), ExprError> {
        let col = self.column();
        match self.bump() {
            Some(t) if t == want => Ok(()),
            _ => Err(ExprError::new(col, format!("expected {what}"))),
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Token::Plus) => BinOp::Add,
                Some(Token::Minus) => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Token::Star) => BinOp::Mul,
                Some(Token::Slash) => BinOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if matches!(self.peek(), Some(Token::Minus)) {
            self.bump();
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if matches!(self.peek(), Some(Token::Caret)) {
            self.bump();
            // Right associativity and `x^-2` both fall out of recursing
            // through the unary level.
            let exponent = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let col = self.column();
        match self.bump() {
            Some(Token::Num(v)) => Ok(Expr::Const(v)),
            Some(Token::LParen) => {
                let inner = self.expr()?;
                self.expect(Token::RParen, "a closing ')'")?;
                Ok(inner)
            }
            Some(Token::Name(name)) => self.name(&name, col),
            Some(other) => Err(ExprError::new(col, format!("unexpected token {other:?}"))),
            None => Err(ExprError::new(col, "unexpected end of expression".to_string())),
        }
    }

    fn name(&mut self, name: &str, col: usize) -> Result<Expr, ExprError> {
        match name {
            "x" => return Ok(Expr::Coord(0)),
            "y" => {
                if self.dim < 2 {
                    return Err(ExprError::new(
                        col,
                        "the variable y is only available on 2-dimensional grids",
                    ));
                }
                return Ok(Expr::Coord(1));
            }
            _ => {}
        }
        let fun1 = match name {
            "sin" => Some(Fun1::Sin),
            "cos" => Some(Fun1::Cos),
            "exp" => Some(Fun1::Exp),
            "abs" => Some(Fun1::Abs),
            _ => None,
        };
        let fun2 = match name {
            "min" => Some(Fun2::Min),
            "max" => Some(Fun2::Max),
            _ => None,
        };
        if fun1.is_none() && fun2.is_none() {
            return Err(ExprError::new(col, format!("unknown identifier '{name}'")));
        }
        self.expect(Token::LParen, &format!("'(' after function '{name}'"))?;
        let first = self.expr()?;
        if let Some(f) = fun1 {
            self.expect(Token::RParen, &format!("')' closing '{name}(..)'"))?;
            return Ok(Expr::Call1(f, Box::new(first)));
        }
        let f = fun2.expect("one of the two function classes matched");
        self.expect(Token::Comma, &format!("',' between the two arguments of '{name}'"))?;
        let second = self.expr()?;
        self.expect(Token::RParen, &format!("')' closing '{name}(.., ..)'"))?;
        Ok(Expr::Call2(f, Box::new(first), Box::new(second)))
    }
}

/// Parse `src` as an expression over the coordinates of a `dim`-dimensional
/// grid.
pub fn parse(src: &str, dim: usize) -> Result<Expr, ExprError> {
    let tokens = lex(src)?;
    if tokens.is_empty() {
        return Err(ExprError::new(1, "empty expression".to_string()));
    }
    let end_column = src.chars().count() + 1;
    let mut parser = Parser { tokens, pos: 0, dim, end_column };
    let expr = parser.expr()?;
    if parser.pos != parser.tokens.len() {
        return Err(ExprError::new(parser.column(), "trailing input after the expression"));
    }
    Ok(expr)
}
