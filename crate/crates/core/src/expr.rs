//! Closed-form expressions in the single variable `s`.
//!
//! The grammar is small and fixed: decimal literals, `s`, the constants `pi`
//! and `e`, the binary operators `+ - * / ^` (with `^` right-associative and
//! binding tightest, then unary minus, then `* /`, then `+ -`), and the unary
//! functions `exp`, `log`, `sin`, `cos`, `tan`, `sqrt`. `log` is the natural
//! logarithm. Whitespace is insignificant and there are no variables other
//! than `s`; anything else is rejected at parse time.
//!
//! Expressions are immutable values. Evaluation either produces a finite
//! number or a per-point [`DomainError`]; it never leaks a NaN. Symbolic
//! differentiation is total and closed over the grammar, so repeated
//! application yields derivatives of any order.

use alloc::borrow::ToOwned;
use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::float;

/// Unary functions of the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Tan,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sqrt => "sqrt",
        }
    }
}

/// Expression tree in the variable `s`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    /// Numeric literal.
    Lit(f64),
    /// The circle constant π.
    Pi,
    /// Euler's number.
    Euler,
    /// The variable `s`.
    Var,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Parse failure with the byte offset it occurred at.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("parse error at byte offset {offset}: expected {expected}")]
pub struct ParseError {
    pub offset: usize,
    pub expected: String,
}

/// Why evaluation failed at a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainErrorKind {
    LogNonPositive,
    SqrtNegative,
    DivisionByZero,
    PowDomain,
    NonFinite,
}

impl DomainErrorKind {
    fn describe(self) -> &'static str {
        match self {
            DomainErrorKind::LogNonPositive => "log of a nonpositive argument",
            DomainErrorKind::SqrtNegative => "sqrt of a negative argument",
            DomainErrorKind::DivisionByZero => "division by zero",
            DomainErrorKind::PowDomain => "power outside its real domain",
            DomainErrorKind::NonFinite => "non-finite intermediate value",
        }
    }
}

/// Evaluation failure: the offending point and the reason.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("domain error at s = {point}: {}", kind.describe())]
pub struct DomainError {
    pub point: f64,
    pub kind: DomainErrorKind,
}

impl Expr {
    pub fn lit(x: f64) -> Expr {
        Expr::Lit(x)
    }

    pub fn var() -> Expr {
        Expr::Var
    }

    /// Literal for an integer, kept exact in f64.
    pub fn int(n: i64) -> Expr {
        Expr::Lit(n as f64)
    }

    /// `a + b` with zero elision and literal folding.
    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Lit(x), Expr::Lit(y)) => Expr::Lit(x + y),
            (Expr::Lit(x), b) if x == 0.0 => b,
            (a, Expr::Lit(y)) if y == 0.0 => a,
            (a, b) => Expr::Add(Box::new(a), Box::new(b)),
        }
    }

    /// `a - b` with zero elision and literal folding.
    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Lit(x), Expr::Lit(y)) => Expr::Lit(x - y),
            (a, Expr::Lit(y)) if y == 0.0 => a,
            (Expr::Lit(x), b) if x == 0.0 => Expr::neg(b),
            (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
        }
    }

    /// `a * b` with zero/one elision and literal folding.
    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Lit(x), Expr::Lit(y)) => Expr::Lit(x * y),
            (Expr::Lit(x), _) | (_, Expr::Lit(x)) if x == 0.0 => Expr::Lit(0.0),
            (Expr::Lit(x), b) if x == 1.0 => b,
            (a, Expr::Lit(y)) if y == 1.0 => a,
            (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }

    /// `a / b` with zero/one elision; literals fold when the quotient is finite.
    pub fn div(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Lit(x), Expr::Lit(y)) if y != 0.0 => Expr::Lit(x / y),
            (Expr::Lit(x), _) if x == 0.0 => Expr::Lit(0.0),
            (a, Expr::Lit(y)) if y == 1.0 => a,
            (a, b) => Expr::Div(Box::new(a), Box::new(b)),
        }
    }

    /// `a ^ b`; exponents 0 and 1 collapse.
    pub fn pow(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (_, Expr::Lit(y)) if *y == 1.0 => return a,
            (_, Expr::Lit(y)) if *y == 0.0 => return Expr::Lit(1.0),
            (Expr::Lit(x), Expr::Lit(y)) => {
                if let Ok(v) = eval_pow(*x, *y, 0.0) {
                    return Expr::Lit(v);
                }
            }
            _ => {}
        }
        Expr::Pow(Box::new(a), Box::new(b))
    }

    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Lit(x) => Expr::Lit(-x),
            Expr::Neg(inner) => *inner,
            a => Expr::Neg(Box::new(a)),
        }
    }

    pub fn call(f: Func, a: Expr) -> Expr {
        Expr::Call(f, Box::new(a))
    }

    pub fn exp(a: Expr) -> Expr {
        Expr::call(Func::Exp, a)
    }

    pub fn log(a: Expr) -> Expr {
        Expr::call(Func::Log, a)
    }

    pub fn sin(a: Expr) -> Expr {
        Expr::call(Func::Sin, a)
    }

    pub fn cos(a: Expr) -> Expr {
        Expr::call(Func::Cos, a)
    }

    pub fn sqrt(a: Expr) -> Expr {
        Expr::call(Func::Sqrt, a)
    }

    /// Parse `text` into an expression tree.
    pub fn parse(text: &str) -> Result<Expr, ParseError> {
        Parser::new(text).parse()
    }

    /// Evaluate at the point `s`.
    pub fn evaluate(&self, s: f64) -> Result<f64, DomainError> {
        let v = self.eval_inner(s)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(DomainError {
                point: s,
                kind: DomainErrorKind::NonFinite,
            })
        }
    }

    fn eval_inner(&self, s: f64) -> Result<f64, DomainError> {
        let err = |kind| DomainError { point: s, kind };
        let v = match self {
            Expr::Lit(x) => *x,
            Expr::Pi => core::f64::consts::PI,
            Expr::Euler => core::f64::consts::E,
            Expr::Var => s,
            Expr::Neg(a) => -a.eval_inner(s)?,
            Expr::Add(a, b) => a.eval_inner(s)? + b.eval_inner(s)?,
            Expr::Sub(a, b) => a.eval_inner(s)? - b.eval_inner(s)?,
            Expr::Mul(a, b) => a.eval_inner(s)? * b.eval_inner(s)?,
            Expr::Div(a, b) => {
                let den = b.eval_inner(s)?;
                if den == 0.0 {
                    return Err(err(DomainErrorKind::DivisionByZero));
                }
                a.eval_inner(s)? / den
            }
            Expr::Pow(a, b) => eval_pow(a.eval_inner(s)?, b.eval_inner(s)?, s)?,
            Expr::Call(f, a) => {
                let x = a.eval_inner(s)?;
                match f {
                    Func::Exp => float::exp(x),
                    Func::Log => {
                        if x <= 0.0 {
                            return Err(err(DomainErrorKind::LogNonPositive));
                        }
                        float::ln(x)
                    }
                    Func::Sin => float::sin(x),
                    Func::Cos => float::cos(x),
                    Func::Tan => float::tan(x),
                    Func::Sqrt => {
                        if x < 0.0 {
                            return Err(err(DomainErrorKind::SqrtNegative));
                        }
                        float::sqrt(x)
                    }
                }
            }
        };
        if v.is_nan() {
            return Err(err(DomainErrorKind::NonFinite));
        }
        Ok(v)
    }

    /// Structural derivative d/ds. Zero and one factors are elided as the
    /// tree is built, but no deeper simplification is attempted.
    pub fn differentiate(&self) -> Expr {
        match self {
            Expr::Lit(_) | Expr::Pi | Expr::Euler => Expr::Lit(0.0),
            Expr::Var => Expr::Lit(1.0),
            Expr::Neg(a) => Expr::neg(a.differentiate()),
            Expr::Add(a, b) => Expr::add(a.differentiate(), b.differentiate()),
            Expr::Sub(a, b) => Expr::sub(a.differentiate(), b.differentiate()),
            Expr::Mul(a, b) => Expr::add(
                Expr::mul(a.differentiate(), (**b).clone()),
                Expr::mul((**a).clone(), b.differentiate()),
            ),
            Expr::Div(a, b) => Expr::div(
                Expr::sub(
                    Expr::mul(a.differentiate(), (**b).clone()),
                    Expr::mul((**a).clone(), b.differentiate()),
                ),
                Expr::pow((**b).clone(), Expr::Lit(2.0)),
            ),
            Expr::Pow(a, b) => match &**b {
                // u^c: constant exponent avoids the logarithmic form.
                Expr::Lit(c) => Expr::mul(
                    Expr::mul(Expr::Lit(*c), Expr::pow((**a).clone(), Expr::Lit(c - 1.0))),
                    a.differentiate(),
                ),
                _ => Expr::mul(
                    Expr::Pow(a.clone(), b.clone()),
                    Expr::add(
                        Expr::mul(b.differentiate(), Expr::log((**a).clone())),
                        Expr::div(Expr::mul((**b).clone(), a.differentiate()), (**a).clone()),
                    ),
                ),
            },
            Expr::Call(f, a) => {
                let da = a.differentiate();
                let u = (**a).clone();
                match f {
                    Func::Exp => Expr::mul(Expr::exp(u), da),
                    Func::Log => Expr::div(da, u),
                    Func::Sin => Expr::mul(Expr::cos(u), da),
                    Func::Cos => Expr::neg(Expr::mul(Expr::sin(u), da)),
                    Func::Tan => Expr::div(da, Expr::pow(Expr::cos(u), Expr::Lit(2.0))),
                    Func::Sqrt => Expr::div(da, Expr::mul(Expr::Lit(2.0), Expr::sqrt(u))),
                }
            }
        }
    }

    /// n-th derivative by repeated application.
    pub fn differentiate_n(&self, order: usize) -> Expr {
        let mut e = self.clone();
        for _ in 0..order {
            e = e.differentiate();
        }
        e
    }

    /// True if the variable `s` occurs anywhere in the tree.
    pub fn contains_var(&self) -> bool {
        match self {
            Expr::Var => true,
            Expr::Lit(_) | Expr::Pi | Expr::Euler => false,
            Expr::Neg(a) | Expr::Call(_, a) => a.contains_var(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.contains_var() || b.contains_var(),
        }
    }

    /// Fold constant subtrees and drop trivial factors; the result evaluates
    /// identically (to rounding) at every point where `self` is defined.
    pub fn simplify(&self) -> Expr {
        if !self.contains_var() {
            if let Ok(v) = self.evaluate(0.0) {
                return Expr::Lit(v);
            }
        }
        match self {
            Expr::Lit(_) | Expr::Pi | Expr::Euler | Expr::Var => self.clone(),
            Expr::Neg(a) => Expr::neg(a.simplify()),
            Expr::Add(a, b) => Expr::add(a.simplify(), b.simplify()),
            Expr::Sub(a, b) => Expr::sub(a.simplify(), b.simplify()),
            Expr::Mul(a, b) => Expr::mul(a.simplify(), b.simplify()),
            Expr::Div(a, b) => Expr::div(a.simplify(), b.simplify()),
            Expr::Pow(a, b) => Expr::pow(a.simplify(), b.simplify()),
            Expr::Call(f, a) => Expr::call(*f, a.simplify()),
        }
    }

    /// Antiderivative for the restricted class the constructors need:
    /// polynomials in `s`, constant multiples, and `exp`/`sin`/`cos` of
    /// arguments linear in `s`. Returns `None` outside that class.
    pub fn antiderivative(&self) -> Option<Expr> {
        if !self.contains_var() {
            return Some(Expr::mul(self.clone(), Expr::Var));
        }
        match self {
            Expr::Var => Some(Expr::div(
                Expr::pow(Expr::Var, Expr::Lit(2.0)),
                Expr::Lit(2.0),
            )),
            Expr::Neg(a) => Some(Expr::neg(a.antiderivative()?)),
            Expr::Add(a, b) => Some(Expr::add(a.antiderivative()?, b.antiderivative()?)),
            Expr::Sub(a, b) => Some(Expr::sub(a.antiderivative()?, b.antiderivative()?)),
            Expr::Mul(a, b) => {
                if !a.contains_var() {
                    Some(Expr::mul((**a).clone(), b.antiderivative()?))
                } else if !b.contains_var() {
                    Some(Expr::mul((**b).clone(), a.antiderivative()?))
                } else {
                    None
                }
            }
            Expr::Div(a, b) => {
                if !b.contains_var() {
                    Some(Expr::div(a.antiderivative()?, (**b).clone()))
                } else if !a.contains_var() && matches!(**b, Expr::Var) {
                    // c/s integrates to c log s.
                    Some(Expr::mul((**a).clone(), Expr::log(Expr::Var)))
                } else {
                    None
                }
            }
            Expr::Pow(base, exponent) => {
                let (a, _) = linear_in_var(base)?;
                let k = match &**exponent {
                    Expr::Lit(k) => *k,
                    _ => return None,
                };
                if a == 0.0 {
                    return None;
                }
                if k == -1.0 {
                    return Some(Expr::div(Expr::log((**base).clone()), Expr::Lit(a)));
                }
                Some(Expr::div(
                    Expr::pow((**base).clone(), Expr::Lit(k + 1.0)),
                    Expr::Lit(a * (k + 1.0)),
                ))
            }
            Expr::Call(f, arg) => {
                let (a, _) = linear_in_var(arg)?;
                if a == 0.0 {
                    return None;
                }
                let arg = (**arg).clone();
                match f {
                    Func::Exp => Some(Expr::div(Expr::exp(arg), Expr::Lit(a))),
                    Func::Cos => Some(Expr::div(Expr::sin(arg), Expr::Lit(a))),
                    Func::Sin => Some(Expr::neg(Expr::div(Expr::cos(arg), Expr::Lit(a)))),
                    _ => None,
                }
            }
            _ => None,
        }
    }
}

/// Decompose `e` as `a·s + b` with numeric coefficients, if it has that shape.
fn linear_in_var(e: &Expr) -> Option<(f64, f64)> {
    match e {
        Expr::Var => Some((1.0, 0.0)),
        Expr::Neg(a) => {
            let (x, y) = linear_in_var(a)?;
            Some((-x, -y))
        }
        Expr::Add(a, b) => {
            let (xa, ya) = linear_in_var(a)?;
            let (xb, yb) = linear_in_var(b)?;
            Some((xa + xb, ya + yb))
        }
        Expr::Sub(a, b) => {
            let (xa, ya) = linear_in_var(a)?;
            let (xb, yb) = linear_in_var(b)?;
            Some((xa - xb, ya - yb))
        }
        Expr::Mul(a, b) => {
            if !a.contains_var() {
                let c = a.evaluate(0.0).ok()?;
                let (x, y) = linear_in_var(b)?;
                Some((c * x, c * y))
            } else if !b.contains_var() {
                let c = b.evaluate(0.0).ok()?;
                let (x, y) = linear_in_var(a)?;
                Some((c * x, c * y))
            } else {
                None
            }
        }
        Expr::Div(a, b) => {
            if !b.contains_var() {
                let c = b.evaluate(0.0).ok()?;
                if c == 0.0 {
                    return None;
                }
                let (x, y) = linear_in_var(a)?;
                Some((x / c, y / c))
            } else {
                None
            }
        }
        _ => {
            if e.contains_var() {
                None
            } else {
                Some((0.0, e.evaluate(0.0).ok()?))
            }
        }
    }
}

fn eval_pow(base: f64, exponent: f64, point: f64) -> Result<f64, DomainError> {
    let err = |kind| DomainError { point, kind };
    if base == 0.0 {
        if exponent > 0.0 {
            return Ok(0.0);
        }
        if exponent == 0.0 {
            return Ok(1.0);
        }
        return Err(err(DomainErrorKind::PowDomain));
    }
    if float::is_integer(exponent) && float::abs(exponent) <= 512.0 {
        // Integer exponents keep negative bases exact.
        let mut acc = 1.0;
        let mut b = base;
        let mut n = float::abs(exponent) as u64;
        while n > 0 {
            if n & 1 == 1 {
                acc *= b;
            }
            b *= b;
            n >>= 1;
        }
        return Ok(if exponent < 0.0 { 1.0 / acc } else { acc });
    }
    if base < 0.0 {
        return Err(err(DomainErrorKind::PowDomain));
    }
    Ok(float::pow(base, exponent))
}

// ---------------------------------------------------------------------------
// Printer
// ---------------------------------------------------------------------------

impl core::fmt::Display for Expr {
    /// Fully parenthesised form; `Expr::parse` of the output evaluates
    /// identically to the original.
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            // Negative literals get their own parentheses so that a
            // reparse never reads the sign as a looser-binding unary minus.
            Expr::Lit(x) if x.is_sign_negative() => write!(f, "({x:?})"),
            Expr::Lit(x) => write!(f, "{x:?}"),
            Expr::Pi => write!(f, "pi"),
            Expr::Euler => write!(f, "e"),
            Expr::Var => write!(f, "s"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

impl core::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Expr::parse(s)
    }
}

// ---------------------------------------------------------------------------
// Lexer and recursive-descent parser
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Token {
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

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Num(x) => format!("number {x:?}"),
            Token::Ident(s) => format!("identifier '{s}'"),
            Token::Plus => "'+'".to_owned(),
            Token::Minus => "'-'".to_owned(),
            Token::Star => "'*'".to_owned(),
            Token::Slash => "'/'".to_owned(),
            Token::Caret => "'^'".to_owned(),
            Token::LParen => "'('".to_owned(),
            Token::RParen => "')'".to_owned(),
        }
    }
}

struct Parser<'a> {
    text: &'a str,
    tokens: Vec<(usize, Token)>,
    pos: usize,
    lex_error: Option<ParseError>,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        let mut tokens = Vec::new();
        let mut lex_error = None;
        let bytes = text.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i];
            match c {
                b' ' | b'\t' | b'\r' | b'\n' => i += 1,
                b'+' => {
                    tokens.push((i, Token::Plus));
                    i += 1;
                }
                b'-' => {
                    tokens.push((i, Token::Minus));
                    i += 1;
                }
                b'*' => {
                    tokens.push((i, Token::Star));
                    i += 1;
                }
                b'/' => {
                    tokens.push((i, Token::Slash));
                    i += 1;
                }
                b'^' => {
                    tokens.push((i, Token::Caret));
                    i += 1;
                }
                b'(' => {
                    tokens.push((i, Token::LParen));
                    i += 1;
                }
                b')' => {
                    tokens.push((i, Token::RParen));
                    i += 1;
                }
                b'0'..=b'9' | b'.' => {
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
                    // Exponent part only when digits follow the marker.
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
                    match text[start..i].parse::<f64>() {
                        Ok(x) => tokens.push((start, Token::Num(x))),
                        Err(_) => {
                            lex_error = Some(ParseError {
                                offset: start,
                                expected: format!("a numeric literal, found '{}'", &text[start..i]),
                            });
                            break;
                        }
                    }
                }
                b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                    let start = i;
                    while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                    {
                        i += 1;
                    }
                    tokens.push((start, Token::Ident(text[start..i].to_owned())));
                }
                _ => {
                    lex_error = Some(ParseError {
                        offset: i,
                        expected: format!("a token, found byte '{}'", bytes[i] as char),
                    });
                    break;
                }
            }
        }
        Parser {
            text,
            tokens,
            pos: 0,
            lex_error,
        }
    }

    fn parse(mut self) -> Result<Expr, ParseError> {
        if let Some(err) = self.lex_error.take() {
            return Err(err);
        }
        let e = self.expr()?;
        if let Some((offset, tok)) = self.tokens.get(self.pos) {
            return Err(ParseError {
                offset: *offset,
                expected: format!("end of input, found {}", tok.describe()),
            });
        }
        Ok(e)
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn bump(&mut self) -> Option<(usize, Token)> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn end_offset(&self) -> usize {
        self.text.len()
    }

    fn error_here(&self, expected: &str) -> ParseError {
        match self.tokens.get(self.pos) {
            Some((offset, tok)) => ParseError {
                offset: *offset,
                expected: format!("{expected}, found {}", tok.describe()),
            },
            None => ParseError {
                offset: self.end_offset(),
                expected: expected.to_owned(),
            },
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Some(Token::RParen) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error_here("')'")),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(Token::Minus) => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
                }
                Some(Token::Slash) => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if matches!(self.peek(), Some(Token::Minus)) {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if matches!(self.peek(), Some(Token::Caret)) {
            self.pos += 1;
            // Right-associative; the exponent may carry a unary minus.
            let exponent = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.bump() {
            Some((_, Token::Num(x))) => Ok(Expr::Lit(x)),
            Some((_, Token::LParen)) => {
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Some((offset, Token::Ident(name))) => match name.as_str() {
                "s" => Ok(Expr::Var),
                "pi" => Ok(Expr::Pi),
                "e" => Ok(Expr::Euler),
                "exp" | "log" | "sin" | "cos" | "tan" | "sqrt" => {
                    let func = match name.as_str() {
                        "exp" => Func::Exp,
                        "log" => Func::Log,
                        "sin" => Func::Sin,
                        "cos" => Func::Cos,
                        "tan" => Func::Tan,
                        _ => Func::Sqrt,
                    };
                    match self.peek() {
                        Some(Token::LParen) => {
                            self.pos += 1;
                            let arg = self.expr()?;
                            self.expect_rparen()?;
                            Ok(Expr::Call(func, Box::new(arg)))
                        }
                        _ => Err(self.error_here(&format!("'(' after function '{name}'"))),
                    }
                }
                _ => Err(ParseError {
                    offset,
                    expected: format!(
                        "one of 's', 'pi', 'e', exp, log, sin, cos, tan, sqrt; found '{name}'"
                    ),
                }),
            },
            Some((offset, tok)) => Err(ParseError {
                offset,
                expected: format!(
                    "a number, 's', a constant, or '('; found {}",
                    tok.describe()
                ),
            }),
            None => Err(ParseError {
                offset: self.end_offset(),
                expected: "a number, 's', a constant, or '('".to_owned(),
            }),
        }
    }
}
