//! Coefficient expression language.
//!
//! Equation coefficients are given as textual expressions in one complex
//! variable `z`, e.g. `"1/z"`, `"(z^2+1)/(z-1)"`, `"0.5*exp(z)"`. The grammar
//! is deliberately small: complex literals, `z`, the constants `i`, `pi`, `e`,
//! unary negation, `+ - * / ^` (integer exponents only), and `exp`/`sin`/`cos`.
//! Everything the hypothesis checks need is a modulus bound, so a small
//! single-valued grammar is enough; powers are restricted to integer
//! exponents to keep every expression meromorphic.
//!
//! Evaluation never returns a non-finite number silently: a division whose
//! divisor has modulus below [`POLE_THRESHOLD`], a negative power of a
//! near-zero base, or any non-finite intermediate yields [`EvalResult::Pole`]
//! carrying the preorder index of the offending subexpression.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use thiserror::Error;

/// A divisor with modulus below this is reported as a pole.
pub const POLE_THRESHOLD: f64 = 1e-300;

/// Named constants admitted by the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NamedConst {
    I,
    Pi,
    E,
}

impl NamedConst {
    fn value(self) -> Complex64 {
        match self {
            NamedConst::I => Complex64::new(0.0, 1.0),
            NamedConst::Pi => Complex64::new(std::f64::consts::PI, 0.0),
            NamedConst::E => Complex64::new(std::f64::consts::E, 0.0),
        }
    }

    fn name(self) -> &'static str {
        match self {
            NamedConst::I => "i",
            NamedConst::Pi => "pi",
            NamedConst::E => "e",
        }
    }
}

/// Bounded elementary function set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Sin,
    Cos,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }

    fn apply(self, v: Complex64) -> Complex64 {
        match self {
            Func::Exp => v.exp(),
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Literal(Complex64),
    Var,
    Const(NamedConst),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, i32),
    Apply(Func, Box<Node>),
}

/// A parsed coefficient function of one complex variable.
///
/// Immutable after parse; evaluation is a pure function, so an `Expression`
/// may be shared freely across worker threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Node,
}

/// Outcome of evaluating an [`Expression`] at a point.
///
/// Exactly one alternative is present: either a finite complex value or a
/// pole marker with the preorder index of the subexpression that failed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalResult {
    Value(Complex64),
    Pole { node: usize },
}

impl EvalResult {
    pub fn value(self) -> Option<Complex64> {
        match self {
            EvalResult::Value(v) => Some(v),
            EvalResult::Pole { .. } => None,
        }
    }

    pub fn is_pole(self) -> bool {
        matches!(self, EvalResult::Pole { .. })
    }
}

/// Errors produced by [`parse_expr`].
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("empty expression")]
    Empty,
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("exponent must be an integer literal at byte {offset}")]
    NonIntegerExponent { offset: usize },
}

/// A pole was hit while evaluating over a grid.
#[derive(Debug, Clone, Copy, Error, PartialEq)]
#[error("pole at grid point {point} (subexpression {node})")]
pub struct PoleOnGrid {
    pub point: Complex64,
    pub node: usize,
}

impl Expression {
    /// Parse an expression from text. See the module docs for the grammar.
    pub fn parse(text: &str) -> Result<Expression, ParseError> {
        parse_expr(text)
    }

    /// Evaluate at `z`, producing a finite value or a pole marker.
    pub fn eval(&self, z: Complex64) -> EvalResult {
        let mut counter = 0usize;
        match eval_node(&self.root, z, &mut counter) {
            Ok(v) => EvalResult::Value(v),
            Err(node) => EvalResult::Pole { node },
        }
    }

    /// True if the expression contains no occurrence of the variable `z`.
    pub fn is_constant(&self) -> bool {
        !contains_var(&self.root)
    }

    /// Fully parenthesized infix serialization; reparsing it yields an
    /// equal tree.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        write_node(&self.root, &mut s);
        s
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl FromStr for Expression {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_expr(s)
    }
}

/// Parse `text` into an [`Expression`].
pub fn parse_expr(text: &str) -> Result<Expression, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::Empty);
    }
    let tokens = lex(text)?;
    let mut p = Parser { tokens, pos: 0 };
    let root = p.parse_sum()?;
    if p.pos < p.tokens.len() {
        let tok = &p.tokens[p.pos];
        return Err(ParseError::Syntax {
            offset: tok.offset,
            message: format!("unexpected `{}`", tok.kind.describe()),
        });
    }
    Ok(Expression { root })
}

/// Maximum of `|e(z)|` over a non-empty grid; any pole on the grid is an
/// error carrying the first offending point.
pub fn sup_modulus_on_grid(e: &Expression, grid: &[Complex64]) -> Result<f64, PoleOnGrid> {
    assert!(!grid.is_empty(), "grid must be non-empty");
    let mut sup = 0.0f64;
    for &z in grid {
        match e.eval(z) {
            EvalResult::Value(v) => sup = sup.max(v.norm()),
            EvalResult::Pole { node } => return Err(PoleOnGrid { point: z, node }),
        }
    }
    Ok(sup)
}

fn contains_var(n: &Node) -> bool {
    match n {
        Node::Literal(_) | Node::Const(_) => false,
        Node::Var => true,
        Node::Neg(a) | Node::Pow(a, _) | Node::Apply(_, a) => contains_var(a),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
            contains_var(a) || contains_var(b)
        }
    }
}

// Preorder traversal; Err carries the index of the node where evaluation
// failed (tiny divisor, negative power of a tiny base, or a non-finite
// intermediate).
fn eval_node(n: &Node, z: Complex64, counter: &mut usize) -> Result<Complex64, usize> {
    let idx = *counter;
    *counter += 1;
    let v = match n {
        Node::Literal(c) => *c,
        Node::Var => z,
        Node::Const(c) => c.value(),
        Node::Neg(a) => -eval_node(a, z, counter)?,
        Node::Add(a, b) => {
            let x = eval_node(a, z, counter)?;
            let y = eval_node(b, z, counter)?;
            x + y
        }
        Node::Sub(a, b) => {
            let x = eval_node(a, z, counter)?;
            let y = eval_node(b, z, counter)?;
            x - y
        }
        Node::Mul(a, b) => {
            let x = eval_node(a, z, counter)?;
            let y = eval_node(b, z, counter)?;
            x * y
        }
        Node::Div(a, b) => {
            let x = eval_node(a, z, counter)?;
            let y = eval_node(b, z, counter)?;
            if y.norm() < POLE_THRESHOLD {
                return Err(idx);
            }
            robust_div(x, y)
        }
        Node::Pow(a, k) => {
            let x = eval_node(a, z, counter)?;
            if *k < 0 && x.norm() < POLE_THRESHOLD {
                return Err(idx);
            }
            x.powi(*k)
        }
        Node::Apply(f, a) => {
            let x = eval_node(a, z, counter)?;
            f.apply(x)
        }
    };
    if !v.re.is_finite() || !v.im.is_finite() {
        return Err(idx);
    }
    Ok(v)
}

// Smith's algorithm; the naive (ac+bd)/(c²+d²) form underflows for divisor
// moduli below ~1e-154, well inside the declared pole threshold
fn robust_div(a: Complex64, b: Complex64) -> Complex64 {
    if b.re.abs() >= b.im.abs() {
        let r = b.im / b.re;
        let t = 1.0 / (b.re + b.im * r);
        Complex64::new((a.re + a.im * r) * t, (a.im - a.re * r) * t)
    } else {
        let r = b.re / b.im;
        let t = 1.0 / (b.re * r + b.im);
        Complex64::new((a.re * r + a.im) * t, (a.im * r - a.re) * t)
    }
}

fn write_node(n: &Node, out: &mut String) {
    use std::fmt::Write;
    match n {
        Node::Literal(c) => {
            if c.im == 0.0 {
                let _ = write!(out, "{}", c.re);
            } else if c.re == 0.0 {
                let _ = write!(out, "{}i", c.im);
            } else if c.im < 0.0 {
                let _ = write!(out, "({}-{}i)", c.re, -c.im);
            } else {
                let _ = write!(out, "({}+{}i)", c.re, c.im);
            }
        }
        Node::Var => out.push('z'),
        Node::Const(c) => out.push_str(c.name()),
        Node::Neg(a) => {
            out.push_str("(-");
            write_node(a, out);
            out.push(')');
        }
        Node::Add(a, b) => write_binary(a, '+', b, out),
        Node::Sub(a, b) => write_binary(a, '-', b, out),
        Node::Mul(a, b) => write_binary(a, '*', b, out),
        Node::Div(a, b) => write_binary(a, '/', b, out),
        Node::Pow(a, k) => {
            out.push('(');
            write_node(a, out);
            let _ = write!(out, "^{}", k);
            out.push(')');
        }
        Node::Apply(f, a) => {
            out.push_str(f.name());
            out.push('(');
            write_node(a, out);
            out.push(')');
        }
    }
}

fn write_binary(a: &Node, op: char, b: &Node, out: &mut String) {
    out.push('(');
    write_node(a, out);
    out.push(op);
    write_node(b, out);
    out.push(')');
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Number { value: f64, imaginary: bool },
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

impl TokenKind {
    fn describe(&self) -> String {
        match self {
            TokenKind::Number { value, imaginary } => {
                if *imaginary {
                    format!("{}i", value)
                } else {
                    format!("{}", value)
                }
            }
            TokenKind::Ident(s) => s.clone(),
            TokenKind::Plus => "+".into(),
            TokenKind::Minus => "-".into(),
            TokenKind::Star => "*".into(),
            TokenKind::Slash => "/".into(),
            TokenKind::Caret => "^".into(),
            TokenKind::LParen => "(".into(),
            TokenKind::RParen => ")".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    offset: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0usize;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let offset = i;
        match c {
            ' ' | '\t' | '\n' | '\r' => {
                i += 1;
            }
            '+' => {
                tokens.push(Token { kind: TokenKind::Plus, offset });
                i += 1;
            }
            '-' => {
                tokens.push(Token { kind: TokenKind::Minus, offset });
                i += 1;
            }
            '*' => {
                tokens.push(Token { kind: TokenKind::Star, offset });
                i += 1;
            }
            '/' => {
                tokens.push(Token { kind: TokenKind::Slash, offset });
                i += 1;
            }
            '^' => {
                tokens.push(Token { kind: TokenKind::Caret, offset });
                i += 1;
            }
            '(' => {
                tokens.push(Token { kind: TokenKind::LParen, offset });
                i += 1;
            }
            ')' => {
                tokens.push(Token { kind: TokenKind::RParen, offset });
                i += 1;
            }
            '0'..='9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                // exponent part only when unambiguously numeric
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let value: f64 = text[start..i].parse().map_err(|_| ParseError::Syntax {
                    offset: start,
                    message: format!("invalid number `{}`", &text[start..i]),
                })?;
                // a trailing `i` fused to the number is an imaginary literal
                let imaginary = i < bytes.len()
                    && bytes[i] == b'i'
                    && !(i + 1 < bytes.len() && is_ident_byte(bytes[i + 1]));
                if imaginary {
                    i += 1;
                }
                tokens.push(Token {
                    kind: TokenKind::Number { value, imaginary },
                    offset: start,
                });
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() && is_ident_byte(bytes[i]) {
                    i += 1;
                }
                tokens.push(Token {
                    kind: TokenKind::Ident(text[start..i].to_string()),
                    offset: start,
                });
            }
            _ => {
                return Err(ParseError::Syntax {
                    offset,
                    message: format!("unexpected character `{}`", c),
                });
            }
        }
    }
    Ok(tokens)
}

fn is_ident_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&TokenKind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn offset(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|t| t.offset)
            .unwrap_or_else(|| self.tokens.last().map(|t| t.offset + 1).unwrap_or(0))
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, kind: &TokenKind, what: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(k) if k == kind => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(ParseError::Syntax {
                offset: self.offset(),
                message: format!("expected {}", what),
            }),
        }
    }

    fn parse_sum(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.parse_term()?;
        loop {
            match self.peek() {
                Some(TokenKind::Plus) => {
                    self.pos += 1;
                    let rhs = self.parse_term()?;
                    lhs = Node::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(TokenKind::Minus) => {
                    self.pos += 1;
                    let rhs = self.parse_term()?;
                    lhs = Node::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.parse_unary()?;
        loop {
            match self.peek() {
                Some(TokenKind::Star) => {
                    self.pos += 1;
                    let rhs = self.parse_unary()?;
                    lhs = Node::Mul(Box::new(lhs), Box::new(rhs));
                }
                Some(TokenKind::Slash) => {
                    self.pos += 1;
                    let rhs = self.parse_unary()?;
                    lhs = Node::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_unary(&mut self) -> Result<Node, ParseError> {
        if matches!(self.peek(), Some(TokenKind::Minus)) {
            self.pos += 1;
            let inner = self.parse_unary()?;
            return Ok(Node::Neg(Box::new(inner)));
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<Node, ParseError> {
        let base = self.parse_atom()?;
        if matches!(self.peek(), Some(TokenKind::Caret)) {
            self.pos += 1;
            let exp = self.parse_int_exponent()?;
            return Ok(Node::Pow(Box::new(base), exp));
        }
        Ok(base)
    }

    // integer literal, optionally signed, optionally parenthesized
    fn parse_int_exponent(&mut self) -> Result<i32, ParseError> {
        let offset = self.offset();
        let parenthesized = matches!(self.peek(), Some(TokenKind::LParen));
        if parenthesized {
            self.pos += 1;
        }
        let mut sign = 1i32;
        match self.peek() {
            Some(TokenKind::Minus) => {
                sign = -1;
                self.pos += 1;
            }
            Some(TokenKind::Plus) => {
                self.pos += 1;
            }
            _ => {}
        }
        let value = match self.bump() {
            Some(Token {
                kind: TokenKind::Number { value, imaginary: false },
                offset,
            }) => {
                if value.fract() != 0.0 || value.abs() > i32::MAX as f64 {
                    return Err(ParseError::NonIntegerExponent { offset });
                }
                value as i32
            }
            _ => return Err(ParseError::NonIntegerExponent { offset }),
        };
        if parenthesized {
            self.expect(&TokenKind::RParen, "`)` after exponent")?;
        }
        Ok(sign * value)
    }

    fn parse_atom(&mut self) -> Result<Node, ParseError> {
        let offset = self.offset();
        match self.bump() {
            Some(Token {
                kind: TokenKind::Number { value, imaginary },
                ..
            }) => {
                let c = if imaginary {
                    Complex64::new(0.0, value)
                } else {
                    Complex64::new(value, 0.0)
                };
                Ok(Node::Literal(c))
            }
            Some(Token {
                kind: TokenKind::Ident(name),
                offset,
            }) => match name.as_str() {
                "z" => Ok(Node::Var),
                "i" => Ok(Node::Const(NamedConst::I)),
                "pi" => Ok(Node::Const(NamedConst::Pi)),
                "e" => Ok(Node::Const(NamedConst::E)),
                "exp" | "sin" | "cos" => {
                    let f = match name.as_str() {
                        "exp" => Func::Exp,
                        "sin" => Func::Sin,
                        _ => Func::Cos,
                    };
                    self.expect(&TokenKind::LParen, "`(` after function name")?;
                    let arg = self.parse_sum()?;
                    self.expect(&TokenKind::RParen, "`)` after function argument")?;
                    Ok(Node::Apply(f, Box::new(arg)))
                }
                _ => Err(ParseError::UnknownIdentifier { offset, name }),
            },
            Some(Token {
                kind: TokenKind::LParen,
                ..
            }) => {
                let inner = self.parse_sum()?;
                self.expect(&TokenKind::RParen, "`)`")?;
                Ok(inner)
            }
            Some(tok) => Err(ParseError::Syntax {
                offset: tok.offset,
                message: format!("unexpected `{}`", tok.kind.describe()),
            }),
            None => Err(ParseError::Syntax {
                offset,
                message: "unexpected end of input".into(),
            }),
        }
    }
}
