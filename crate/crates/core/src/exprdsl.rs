//! Scalar coefficient expressions in the variables `t` and `x`.
//!
//! Grammar (whitespace insensitive, `-` and U+2212 `−` both mean minus):
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?            right associative
//! atom  := number | 't' | 'x' | name '(' expr ')' | '(' expr ')'
//! name  := exp | sin | cos | sqrt | abs | erf
//! ```
//!
//! Power binds tighter than unary minus, so `-x^2` is `-(x^2)`, while an
//! exponent may itself be negated (`2^-x`). Errors carry the byte offset of
//! the offending token.

use std::fmt;

use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
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

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Exp,
    Sin,
    Cos,
    Sqrt,
    Abs,
    Erf,
}

impl Func {
    pub const ALL: [Func; 6] = [Func::Exp, Func::Sin, Func::Cos, Func::Sqrt, Func::Abs, Func::Erf];

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Erf => "erf",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == s)
    }
}

#[derive(Clone, Debug)]
pub enum Expr {
    Const(f64),
    T,
    X,
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// An expression node with the byte offset it was parsed from.
#[derive(Clone, Debug)]
pub struct Node {
    pub expr: Expr,
    pub offset: usize,
}

impl Node {
    pub fn new(expr: Expr, offset: usize) -> Self {
        Self { expr, offset }
    }
}

/// Structural equality; source offsets are ignored.
impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        match (&self.expr, &other.expr) {
            (Expr::Const(a), Expr::Const(b)) => a.to_bits() == b.to_bits(),
            (Expr::T, Expr::T) | (Expr::X, Expr::X) => true,
            (Expr::Neg(a), Expr::Neg(b)) => a == b,
            (Expr::Binary(o1, l1, r1), Expr::Binary(o2, l2, r2)) => o1 == o2 && l1 == l2 && r1 == r2,
            (Expr::Call(f1, a1), Expr::Call(f2, a2)) => f1 == f2 && a1 == a2,
            _ => false,
        }
    }
}

/// Fully parenthesized rendering that re-parses to the same tree.
impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.expr {
            Expr::Const(v) => write!(f, "{v:?}"),
            Expr::T => f.write_str("t"),
            Expr::X => f.write_str("x"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnknownIdentifier(String),
    UnbalancedParenthesis,
    TrailingTokens,
    UnexpectedCharacter(char),
    UnexpectedToken(String),
    UnexpectedEnd,
    InvalidNumber(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{} at offset {offset}", describe_parse(.kind))]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub offset: usize,
}

fn describe_parse(kind: &ParseErrorKind) -> String {
    match kind {
        ParseErrorKind::UnknownIdentifier(s) => format!("unknown identifier '{s}'"),
        ParseErrorKind::UnbalancedParenthesis => "unbalanced parenthesis".into(),
        ParseErrorKind::TrailingTokens => "trailing tokens".into(),
        ParseErrorKind::UnexpectedCharacter(c) => format!("unexpected character '{c}'"),
        ParseErrorKind::UnexpectedToken(s) => format!("unexpected token '{s}'"),
        ParseErrorKind::UnexpectedEnd => "unexpected end of input".into(),
        ParseErrorKind::InvalidNumber(s) => format!("invalid number '{s}'"),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EvalErrorKind {
    DivisionByZero,
    Domain(&'static str),
    NonFinite,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{} at offset {offset}", describe_eval(.kind))]
pub struct EvalError {
    pub kind: EvalErrorKind,
    pub offset: usize,
}

fn describe_eval(kind: &EvalErrorKind) -> String {
    match kind {
        EvalErrorKind::DivisionByZero => "division by zero".into(),
        EvalErrorKind::Domain(what) => format!("domain error in {what}"),
        EvalErrorKind::NonFinite => "non-finite result".into(),
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

impl Tok {
    fn text(&self) -> String {
        match self {
            Tok::Num(v) => format!("{v}"),
            Tok::Ident(s) => s.clone(),
            Tok::Plus => "+".into(),
            Tok::Minus => "-".into(),
            Tok::Star => "*".into(),
            Tok::Slash => "/".into(),
            Tok::Caret => "^".into(),
            Tok::LParen => "(".into(),
            Tok::RParen => ")".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let mut out = Vec::new();
    let mut chars = src.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        let single = match c {
            c if c.is_whitespace() => {
                chars.next();
                continue;
            }
            '+' => Some(Tok::Plus),
            '-' | '\u{2212}' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = single {
            chars.next();
            out.push((tok, i));
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let mut end = i;
            let mut prev = '\0';
            while let Some(&(j, d)) = chars.peek() {
                let exp_sign = (d == '+' || d == '-') && (prev == 'e' || prev == 'E');
                if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                    end = j + d.len_utf8();
                    prev = d;
                    chars.next();
                } else {
                    break;
                }
            }
            let text = &src[i..end];
            let v: f64 = text.parse().map_err(|_| ParseError { kind: ParseErrorKind::InvalidNumber(text.to_string()), offset: i })?;
            out.push((Tok::Num(v), i));
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let mut end = i;
            while let Some(&(j, d)) = chars.peek() {
                if d.is_alphanumeric() || d == '_' {
                    end = j + d.len_utf8();
                    chars.next();
                } else {
                    break;
                }
            }
            out.push((Tok::Ident(src[i..end].to_string()), i));
            continue;
        }
        return Err(ParseError { kind: ParseErrorKind::UnexpectedCharacter(c), offset: i });
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(_, o)| *o)
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        while let Some(op) = match self.peek() {
            Some(Tok::Plus) => Some(BinOp::Add),
            Some(Tok::Minus) => Some(BinOp::Sub),
            _ => None,
        } {
            let at = self.offset();
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::new(Expr::Binary(op, Box::new(lhs), Box::new(rhs)), at);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(op) = match self.peek() {
            Some(Tok::Star) => Some(BinOp::Mul),
            Some(Tok::Slash) => Some(BinOp::Div),
            _ => None,
        } {
            let at = self.offset();
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::new(Expr::Binary(op, Box::new(lhs), Box::new(rhs)), at);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if self.peek() == Some(&Tok::Minus) {
            let at = self.offset();
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(Node::new(Expr::Neg(Box::new(inner)), at));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if self.peek() == Some(&Tok::Caret) {
            let at = self.offset();
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Node::new(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)), at));
        }
        Ok(base)
    }

    fn closing_paren(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::RParen) => {
                self.pos += 1;
                Ok(())
            }
            None => Err(ParseError { kind: ParseErrorKind::UnbalancedParenthesis, offset: self.end }),
            Some(t) => Err(ParseError { kind: ParseErrorKind::UnexpectedToken(t.text()), offset: self.offset() }),
        }
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let at = self.offset();
        let Some(tok) = self.peek().cloned() else {
            return Err(ParseError { kind: ParseErrorKind::UnexpectedEnd, offset: self.end });
        };
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Node::new(Expr::Const(v), at)),
            Tok::Ident(name) => match name.as_str() {
                "t" => Ok(Node::new(Expr::T, at)),
                "x" => Ok(Node::new(Expr::X, at)),
                _ => {
                    let Some(func) = Func::from_name(&name) else {
                        return Err(ParseError { kind: ParseErrorKind::UnknownIdentifier(name), offset: at });
                    };
                    if self.peek() != Some(&Tok::LParen) {
                        return Err(ParseError {
                            kind: match self.peek() {
                                Some(t) => ParseErrorKind::UnexpectedToken(t.text()),
                                None => ParseErrorKind::UnexpectedEnd,
                            },
                            offset: self.offset(),
                        });
                    }
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.closing_paren()?;
                    Ok(Node::new(Expr::Call(func, Box::new(arg)), at))
                }
            },
            Tok::LParen => {
                let inner = self.expr()?;
                self.closing_paren()?;
                Ok(inner)
            }
            Tok::RParen => Err(ParseError { kind: ParseErrorKind::UnbalancedParenthesis, offset: at }),
            other => Err(ParseError { kind: ParseErrorKind::UnexpectedToken(other.text()), offset: at }),
        }
    }
}

/// Parses `src` into an expression tree.
pub fn parse(src: &str) -> Result<Node, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, end: src.len() };
    let root = p.expr()?;
    if let Some(tok) = p.peek() {
        let kind = if *tok == Tok::RParen { ParseErrorKind::UnbalancedParenthesis } else { ParseErrorKind::TrailingTokens };
        return Err(ParseError { kind, offset: p.offset() });
    }
    Ok(root)
}

/// Evaluates `ast` at `(t, x)` in IEEE double precision.
pub fn eval(ast: &Node, t: f64, x: f64) -> Result<f64, EvalError> {
    let err = |kind| EvalError { kind, offset: ast.offset };
    let v = match &ast.expr {
        Expr::Const(v) => *v,
        Expr::T => t,
        Expr::X => x,
        Expr::Neg(a) => -eval(a, t, x)?,
        Expr::Binary(op, l, r) => {
            let a = eval(l, t, x)?;
            let b = eval(r, t, x)?;
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => {
                    if b == 0.0 {
                        return Err(err(EvalErrorKind::DivisionByZero));
                    }
                    a / b
                }
                BinOp::Pow => {
                    let v = a.powf(b);
                    if v.is_nan() {
                        return Err(err(EvalErrorKind::Domain("power")));
                    }
                    if a == 0.0 && b < 0.0 {
                        return Err(err(EvalErrorKind::DivisionByZero));
                    }
                    v
                }
            }
        }
        Expr::Call(func, a) => {
            let v = eval(a, t, x)?;
            match func {
                Func::Exp => v.exp(),
                Func::Sin => v.sin(),
                Func::Cos => v.cos(),
                Func::Sqrt => {
                    if v < 0.0 {
                        return Err(err(EvalErrorKind::Domain("sqrt")));
                    }
                    v.sqrt()
                }
                Func::Abs => v.abs(),
                Func::Erf => libm::erf(v),
            }
        }
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(err(EvalErrorKind::NonFinite))
    }
}

/// A parsed expression together with its source text.
#[derive(Clone, Debug)]
pub struct Expression {
    src: String,
    ast: Node,
}

impl Expression {
    pub fn parse(src: &str) -> Result<Self, ParseError> {
        Ok(Self { src: src.to_string(), ast: parse(src)? })
    }

    pub fn constant(v: f64) -> Self {
        Self { src: format!("{v:?}"), ast: Node::new(Expr::Const(v), 0) }
    }

    pub fn source(&self) -> &str {
        &self.src
    }

    pub fn ast(&self) -> &Node {
        &self.ast
    }

    pub fn eval(&self, t: f64, x: f64) -> Result<f64, EvalError> {
        eval(&self.ast, t, x)
    }

    /// Evaluates, mapping evaluation errors to NaN for use inside numeric
    /// kernels that check finiteness downstream.
    pub fn eval_or_nan(&self, t: f64, x: f64) -> f64 {
        self.eval(t, x).unwrap_or(f64::NAN)
    }
}
