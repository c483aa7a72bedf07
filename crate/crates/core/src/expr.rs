//! Scalar expressions over `x1..xn`, `v1..vn`, `u1..um` and `t`.
//!
//! Grammar (whitespace insensitive):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := base ('^' uint)?
//! base   := number | ident | '(' expr ')' | func '(' args ')'
//! func   := sin | cos | exp | sqrt | abs | min | max
//! ```
//!
//! `^` binds tighter than unary minus, so `-x1^2` is `-(x1^2)`.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::Vector;

/// A free variable. Indices are zero based (`x1` is `X(0)`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    X(usize),
    V(usize),
    U(usize),
    T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
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

    /// abs, min and max are the kink atoms of the nonsmooth fragment.
    pub fn is_kink(self) -> bool {
        matches!(self, Func::Abs | Func::Min | Func::Max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
    Call(Func, Vec<Expr>),
}

/// Variable values for evaluation.
#[derive(Clone, Copy, Debug, Default)]
pub struct Env<'a> {
    pub x: &'a [f64],
    pub v: &'a [f64],
    pub u: &'a [f64],
    pub t: f64,
}

impl<'a> Env<'a> {
    pub fn new(x: &'a [f64], v: &'a [f64], u: &'a [f64], t: f64) -> Self {
        Env { x, v, u, t }
    }

    pub fn x(x: &'a [f64], t: f64) -> Self {
        Env { x, v: &[], u: &[], t }
    }

    fn get(&self, var: Var) -> f64 {
        match var {
            Var::X(i) => self.x.get(i).copied().unwrap_or(f64::NAN),
            Var::V(i) => self.v.get(i).copied().unwrap_or(f64::NAN),
            Var::U(i) => self.u.get(i).copied().unwrap_or(f64::NAN),
            Var::T => self.t,
        }
    }
}

/// Which variables a gradient is taken with respect to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Wrt {
    X(usize),
    V(usize),
    U(usize),
    /// joint `(x, v)` with the given state dimension
    XV(usize),
}

impl Wrt {
    pub fn dim(self) -> usize {
        match self {
            Wrt::X(n) | Wrt::V(n) | Wrt::U(n) => n,
            Wrt::XV(n) => 2 * n,
        }
    }

    fn position(self, var: Var) -> Option<usize> {
        match (self, var) {
            (Wrt::X(_), Var::X(i)) | (Wrt::V(_), Var::V(i)) | (Wrt::U(_), Var::U(i)) => Some(i),
            (Wrt::XV(_), Var::X(i)) => Some(i),
            (Wrt::XV(n), Var::V(i)) => Some(n + i),
            _ => None,
        }
    }
}

/// Curvature of an expression with respect to one variable group.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Curvature {
    Constant,
    Affine,
    Convex,
    Concave,
    Unknown,
}

impl Curvature {
    fn flip(self) -> Curvature {
        match self {
            Curvature::Convex => Curvature::Concave,
            Curvature::Concave => Curvature::Convex,
            c => c,
        }
    }

    fn add(self, other: Curvature) -> Curvature {
        use Curvature::*;
        match (self, other) {
            (Constant, c) | (c, Constant) => c,
            (Affine, c) | (c, Affine) => c,
            (Convex, Convex) => Convex,
            (Concave, Concave) => Concave,
            _ => Unknown,
        }
    }

    pub fn is_convex(self) -> bool {
        matches!(self, Curvature::Constant | Curvature::Affine | Curvature::Convex)
    }

    fn is_concave(self) -> bool {
        matches!(self, Curvature::Constant | Curvature::Affine | Curvature::Concave)
    }
}

// ---------------------------------------------------------------------------
// parsing

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
    Comma,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    toks: Vec<(Tok, usize)>,
}

impl<'a> Lexer<'a> {
    fn run(src: &'a str) -> Result<Vec<(Tok, usize)>> {
        let mut lx = Lexer {
            src,
            toks: Vec::new(),
        };
        lx.scan()?;
        Ok(lx.toks)
    }

    fn scan(&mut self) -> Result<()> {
        let bytes = self.src.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i];
            let start = i;
            match c {
                b' ' | b'\t' | b'\n' | b'\r' => {
                    i += 1;
                    continue;
                }
                b'+' => self.toks.push((Tok::Plus, start)),
                b'-' => self.toks.push((Tok::Minus, start)),
                b'*' => self.toks.push((Tok::Star, start)),
                b'/' => self.toks.push((Tok::Slash, start)),
                b'^' => self.toks.push((Tok::Caret, start)),
                b'(' => self.toks.push((Tok::LParen, start)),
                b')' => self.toks.push((Tok::RParen, start)),
                b',' => self.toks.push((Tok::Comma, start)),
                b'0'..=b'9' | b'.' => {
                    let mut j = i;
                    while j < bytes.len() && (bytes[j].is_ascii_digit() || bytes[j] == b'.') {
                        j += 1;
                    }
                    if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
                        let mut k = j + 1;
                        if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                            k += 1;
                        }
                        if k < bytes.len() && bytes[k].is_ascii_digit() {
                            while k < bytes.len() && bytes[k].is_ascii_digit() {
                                k += 1;
                            }
                            j = k;
                        }
                    }
                    let text = &self.src[i..j];
                    let value: f64 = text.parse().map_err(|_| Error::Syntax {
                        offset: start,
                        message: format!("malformed number `{text}`"),
                    })?;
                    self.toks.push((Tok::Num(value), start));
                    i = j;
                    continue;
                }
                c if c.is_ascii_alphabetic() || c == b'_' => {
                    let mut j = i;
                    while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                        j += 1;
                    }
                    self.toks.push((Tok::Ident(self.src[i..j].to_string()), start));
                    i = j;
                    continue;
                }
                _ => {
                    let ch = self.src[i..].chars().next().unwrap_or('?');
                    return Err(Error::Syntax {
                        offset: start,
                        message: format!("unexpected character `{ch}`"),
                    });
                }
            }
            i += 1;
        }
        self.toks.push((Tok::End, self.src.len()));
        Ok(())
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(Error::Syntax {
                offset: self.offset(),
                message: format!("expected {what}"),
            })
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Slash => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.base()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let at = self.offset();
        match self.bump() {
            Tok::Num(v) if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 => {
                Ok(Expr::Pow(Box::new(base), v as u32))
            }
            _ => Err(Error::Syntax {
                offset: at,
                message: "exponent must be an unsigned integer literal".into(),
            }),
        }
    }

    fn base(&mut self) -> Result<Expr> {
        let at = self.offset();
        match self.bump() {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if *self.peek() == Tok::LParen {
                    let func = Func::from_name(&name).ok_or(Error::UnknownIdentifier {
                        name: name.clone(),
                        offset: at,
                    })?;
                    self.bump();
                    let mut args = Vec::new();
                    if *self.peek() != Tok::RParen {
                        args.push(self.expr()?);
                        while *self.peek() == Tok::Comma {
                            self.bump();
                            args.push(self.expr()?);
                        }
                    }
                    self.expect(Tok::RParen, "`)` or `,`")?;
                    if args.len() != func.arity() {
                        return Err(Error::Arity {
                            name,
                            expected: func.arity(),
                            got: args.len(),
                        });
                    }
                    Ok(Expr::Call(func, args))
                } else {
                    parse_var(&name)
                        .map(Expr::Var)
                        .ok_or(Error::UnknownIdentifier { name, offset: at })
                }
            }
            Tok::End => Err(Error::Syntax {
                offset: at,
                message: "unexpected end of input".into(),
            }),
            _ => Err(Error::Syntax {
                offset: at,
                message: "expected a number, variable, function or `(`".into(),
            }),
        }
    }
}

fn parse_var(name: &str) -> Option<Var> {
    if name == "t" {
        return Some(Var::T);
    }
    let (head, digits) = name.split_at(1);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let idx: usize = digits.parse().ok()?;
    if idx == 0 {
        return None;
    }
    match head {
        "x" => Some(Var::X(idx - 1)),
        "v" => Some(Var::V(idx - 1)),
        "u" => Some(Var::U(idx - 1)),
        _ => None,
    }
}

/// Parses `text` into an expression tree.
pub fn parse_expression(text: &str) -> Result<Expr> {
    if text.trim().is_empty() {
        return Err(Error::Syntax {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let toks = Lexer::run(text)?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(Error::Syntax {
            offset: p.offset(),
            message: "unexpected trailing input".into(),
        });
    }
    Ok(e)
}

impl std::str::FromStr for Expr {
    type Err = Error;
    fn from_str(s: &str) -> Result<Expr> {
        parse_expression(s)
    }
}

// ---------------------------------------------------------------------------
// printing

impl Expr {
    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Num(_) | Expr::Var(_) | Expr::Call(..) => 5,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        let wrap = self.precedence() < min_prec || matches!(self, Expr::Num(v) if *v < 0.0);
        if wrap {
            f.write_str("(")?;
        }
        match self {
            Expr::Num(v) => write!(f, "{v}")?,
            Expr::Var(var) => match var {
                Var::X(i) => write!(f, "x{}", i + 1)?,
                Var::V(i) => write!(f, "v{}", i + 1)?,
                Var::U(i) => write!(f, "u{}", i + 1)?,
                Var::T => f.write_str("t")?,
            },
            Expr::Neg(a) => {
                f.write_str("-")?;
                a.write_at(f, 3)?;
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                a.write_at(f, 1)?;
                f.write_str(if matches!(self, Expr::Add(..)) { " + " } else { " - " })?;
                b.write_at(f, 2)?;
            }
            Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.write_at(f, 2)?;
                f.write_str(if matches!(self, Expr::Mul(..)) { "*" } else { "/" })?;
                b.write_at(f, 3)?;
            }
            Expr::Pow(a, n) => {
                a.write_at(f, 5)?;
                write!(f, "^{n}")?;
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    a.write_at(f, 0)?;
                }
                f.write_str(")")?;
            }
        }
        if wrap {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, 0)
    }
}

// ---------------------------------------------------------------------------
// evaluation

fn smooth_abs(a: f64, mu: f64) -> f64 {
    (a * a + mu * mu).sqrt()
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    /// Exact evaluation.
    pub fn eval(&self, env: &Env) -> f64 {
        self.eval_with(env, None)
    }

    /// Evaluation with abs/min/max replaced by their `mu`-smoothings when
    /// `smoothing` is set.
    pub fn eval_with(&self, env: &Env, smoothing: Option<f64>) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(var) => env.get(*var),
            Expr::Neg(a) => -a.eval_with(env, smoothing),
            Expr::Add(a, b) => a.eval_with(env, smoothing) + b.eval_with(env, smoothing),
            Expr::Sub(a, b) => a.eval_with(env, smoothing) - b.eval_with(env, smoothing),
            Expr::Mul(a, b) => a.eval_with(env, smoothing) * b.eval_with(env, smoothing),
            Expr::Div(a, b) => a.eval_with(env, smoothing) / b.eval_with(env, smoothing),
            Expr::Pow(a, n) => a.eval_with(env, smoothing).powi(*n as i32),
            Expr::Call(func, args) => {
                let a = args[0].eval_with(env, smoothing);
                match func {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Sqrt => a.sqrt(),
                    Func::Abs => match smoothing {
                        Some(mu) => smooth_abs(a, mu),
                        None => a.abs(),
                    },
                    Func::Min | Func::Max => {
                        let b = args[1].eval_with(env, smoothing);
                        let sign = if *func == Func::Max { 1.0 } else { -1.0 };
                        match smoothing {
                            Some(mu) => 0.5 * (a + b + sign * smooth_abs(a - b, mu)),
                            None if *func == Func::Max => a.max(b),
                            None => a.min(b),
                        }
                    }
                }
            }
        }
    }

    /// Value and gradient by forward-mode differentiation.
    ///
    /// At exact kinks the selection `abs'(0) = 1`, `max -> first argument`,
    /// `min -> first argument` is used; [`crate::gendiff`] handles kinks
    /// properly.
    pub fn grad(&self, env: &Env, wrt: Wrt) -> (f64, Vector) {
        self.grad_with(env, wrt, None)
    }

    pub fn grad_with(&self, env: &Env, wrt: Wrt, smoothing: Option<f64>) -> (f64, Vector) {
        let dim = wrt.dim();
        match self {
            Expr::Num(v) => (*v, Vector::zeros(dim)),
            Expr::Var(var) => {
                let mut g = Vector::zeros(dim);
                if let Some(p) = wrt.position(*var) {
                    if p < dim {
                        g[p] = 1.0;
                    }
                }
                (env.get(*var), g)
            }
            Expr::Neg(a) => {
                let (v, g) = a.grad_with(env, wrt, smoothing);
                (-v, -g)
            }
            Expr::Add(a, b) => {
                let (va, ga) = a.grad_with(env, wrt, smoothing);
                let (vb, gb) = b.grad_with(env, wrt, smoothing);
                (va + vb, ga + gb)
            }
            Expr::Sub(a, b) => {
                let (va, ga) = a.grad_with(env, wrt, smoothing);
                let (vb, gb) = b.grad_with(env, wrt, smoothing);
                (va - vb, ga - gb)
            }
            Expr::Mul(a, b) => {
                let (va, ga) = a.grad_with(env, wrt, smoothing);
                let (vb, gb) = b.grad_with(env, wrt, smoothing);
                (va * vb, ga * vb + gb * va)
            }
            Expr::Div(a, b) => {
                let (va, ga) = a.grad_with(env, wrt, smoothing);
                let (vb, gb) = b.grad_with(env, wrt, smoothing);
                (va / vb, (ga * vb - gb * va) / (vb * vb))
            }
            Expr::Pow(a, n) => {
                if *n == 0 {
                    return (1.0, Vector::zeros(dim));
                }
                let (va, ga) = a.grad_with(env, wrt, smoothing);
                let d = *n as f64 * va.powi(*n as i32 - 1);
                (va.powi(*n as i32), ga * d)
            }
            Expr::Call(func, args) => {
                let (va, ga) = args[0].grad_with(env, wrt, smoothing);
                match func {
                    Func::Sin => (va.sin(), ga * va.cos()),
                    Func::Cos => (va.cos(), ga * (-va.sin())),
                    Func::Exp => {
                        let e = va.exp();
                        (e, ga * e)
                    }
                    Func::Sqrt => {
                        let s = va.sqrt();
                        (s, ga * (0.5 / s))
                    }
                    Func::Abs => match smoothing {
                        Some(mu) => {
                            let s = smooth_abs(va, mu);
                            (s, ga * (va / s))
                        }
                        None => {
                            let sign = if va >= 0.0 { 1.0 } else { -1.0 };
                            (va.abs(), ga * sign)
                        }
                    },
                    Func::Min | Func::Max => {
                        let (vb, gb) = args[1].grad_with(env, wrt, smoothing);
                        let sign = if *func == Func::Max { 1.0 } else { -1.0 };
                        match smoothing {
                            Some(mu) => {
                                let d = va - vb;
                                let s = smooth_abs(d, mu);
                                let val = 0.5 * (va + vb + sign * s);
                                let g = (&ga + &gb + (ga - gb) * (sign * d / s)) * 0.5;
                                (val, g)
                            }
                            None => {
                                let pick_a = if *func == Func::Max { va >= vb } else { va <= vb };
                                if pick_a {
                                    (va, ga)
                                } else {
                                    (vb, gb)
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    /// Visits every node, parents before children.
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a Expr)) {
        visit(self);
        match self {
            Expr::Num(_) | Expr::Var(_) => {}
            Expr::Neg(a) | Expr::Pow(a, _) => a.walk(visit),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.walk(visit);
                b.walk(visit);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.walk(visit)),
        }
    }

    /// All variables referenced, sorted and deduplicated.
    pub fn vars(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let Expr::Var(v) = e {
                out.push(*v);
            }
        });
        out.sort();
        out.dedup();
        out
    }

    pub fn depends_on(&self, pred: impl Fn(Var) -> bool) -> bool {
        self.vars().into_iter().any(pred)
    }

    pub fn depends_on_v(&self) -> bool {
        self.depends_on(|v| matches!(v, Var::V(_)))
    }

    /// True if the expression contains abs, min or max.
    pub fn has_kink(&self) -> bool {
        let mut found = false;
        self.walk(&mut |e| {
            if let Expr::Call(f, _) = e {
                found |= f.is_kink();
            }
        });
        found
    }

    /// Value if the expression references no variables.
    pub fn constant_value(&self) -> Option<f64> {
        if self.vars().is_empty() {
            Some(self.eval(&Env::default()))
        } else {
            None
        }
    }

    /// Rejects variables outside the allowed set.
    pub fn check_vars(&self, allowed: impl Fn(Var) -> bool, context: &str) -> Result<()> {
        for v in self.vars() {
            if !allowed(v) {
                return Err(Error::Config(format!(
                    "{context}: variable `{}` is not allowed here",
                    Expr::Var(v)
                )));
            }
        }
        Ok(())
    }

    /// Syntactic curvature with respect to the variables selected by `group`.
    pub fn curvature(&self, group: &impl Fn(Var) -> bool) -> Curvature {
        use Curvature::*;
        if !self.depends_on(group) {
            return Constant;
        }
        match self {
            Expr::Num(_) => Constant,
            Expr::Var(_) => Affine,
            Expr::Neg(a) => a.curvature(group).flip(),
            Expr::Add(a, b) => a.curvature(group).add(b.curvature(group)),
            Expr::Sub(a, b) => a.curvature(group).add(b.curvature(group).flip()),
            Expr::Mul(a, b) => {
                let (ca, cb) = (a.curvature(group), b.curvature(group));
                match (ca, cb) {
                    (Constant, other) => scale_curvature(a, other),
                    (other, Constant) => scale_curvature(b, other),
                    _ => Unknown,
                }
            }
            Expr::Div(a, b) => {
                if b.curvature(group) != Constant {
                    return Unknown;
                }
                let ca = a.curvature(group);
                match b.constant_value() {
                    Some(c) if c > 0.0 => ca,
                    Some(c) if c < 0.0 => ca.flip(),
                    Some(_) => Unknown,
                    None if ca == Affine => Affine,
                    None => Unknown,
                }
            }
            Expr::Pow(a, n) => {
                let ca = a.curvature(group);
                match (ca, *n) {
                    (_, 0) => Constant,
                    (c, 1) => c,
                    (Affine, n) if n % 2 == 0 => Convex,
                    _ => Unknown,
                }
            }
            Expr::Call(func, args) => {
                let ca = args[0].curvature(group);
                match func {
                    Func::Abs if ca == Affine => Convex,
                    Func::Exp if ca.is_convex() => Convex,
                    Func::Sqrt if ca.is_concave() => Concave,
                    Func::Max => {
                        let cb = args[1].curvature(group);
                        if ca.is_convex() && cb.is_convex() {
                            Convex
                        } else {
                            Unknown
                        }
                    }
                    Func::Min => {
                        let cb = args[1].curvature(group);
                        if ca.is_concave() && cb.is_concave() {
                            Concave
                        } else {
                            Unknown
                        }
                    }
                    _ => Unknown,
                }
            }
        }
    }
}

fn scale_curvature(factor: &Expr, c: Curvature) -> Curvature {
    match factor.constant_value() {
        Some(s) if s > 0.0 => c,
        Some(s) if s < 0.0 => c.flip(),
        Some(_) => Curvature::Constant,
        None if matches!(c, Curvature::Affine) => Curvature::Affine,
        None => Curvature::Unknown,
    }
}
