//! Scalar expressions over the Darboux chart variables `q1..qn`, `p1..pn`, `z`.
//!
//! Expressions are parsed from text, evaluated in IEEE double precision and
//! differentiated symbolically. Every node that can leave the real domain
//! (division, `log`, `sqrt`, `^`) carries the byte offset of its operator in
//! the source text so evaluation failures point back at the input.

mod diff;
mod parse;

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{DomainKind, Error, Result};

pub use parse::parse;

/// A chart variable. Indices are zero-based internally and printed one-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    Q(usize),
    P(usize),
    Z,
}

impl Var {
    /// Position of this variable in the packed `(q, p, z)` layout of a chart of half-dimension `n`.
    pub fn slot(self, n: usize) -> usize {
        match self {
            Var::Q(i) => i,
            Var::P(i) => n + i,
            Var::Z => 2 * n,
        }
    }

    /// Inverse of [`Var::slot`].
    pub fn from_slot(slot: usize, n: usize) -> Var {
        if slot < n {
            Var::Q(slot)
        } else if slot < 2 * n {
            Var::P(slot - n)
        } else {
            Var::Z
        }
    }

    pub fn all(n: usize) -> impl Iterator<Item = Var> {
        (0..2 * n + 1).map(move |s| Var::from_slot(s, n))
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Q(i) => write!(f, "q{}", i + 1),
            Var::P(i) => write!(f, "p{}", i + 1),
            Var::Z => f.write_str("z"),
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
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Tanh,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Tanh => "tanh",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }

    pub const ALL: [Func; 6] = [Func::Sin, Func::Cos, Func::Exp, Func::Log, Func::Sqrt, Func::Tanh];
}

/// Expression AST. Immutable once built; cheap to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr>, at: usize },
    Call { func: Func, arg: Box<Expr>, at: usize },
}

/// Values for every chart variable, packed as `(q1..qn, p1..pn, z)`.
#[derive(Debug, Clone, Copy)]
pub struct Binding<'a> {
    n: usize,
    values: &'a [f64],
}

impl<'a> Binding<'a> {
    pub fn new(n: usize, values: &'a [f64]) -> Result<Self> {
        if values.len() != 2 * n + 1 {
            return Err(Error::DimensionMismatch { expected: 2 * n + 1, got: values.len() });
        }
        Ok(Binding { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, v: Var) -> Option<f64> {
        let idx = match v {
            Var::Q(i) | Var::P(i) if i >= self.n => return None,
            _ => v.slot(self.n),
        };
        self.values.get(idx).copied()
    }
}

fn domain(kind: DomainKind, offset: usize) -> Error {
    Error::Domain { kind, offset }
}

fn finite(x: f64, offset: usize) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(domain(DomainKind::NonFinite, offset))
    }
}

fn checked_pow(base: f64, exp: f64, at: usize) -> Result<f64> {
    if base == 0.0 && exp < 0.0 {
        return Err(domain(DomainKind::DivisionByZero, at));
    }
    if base < 0.0 && exp.fract() != 0.0 {
        return Err(domain(DomainKind::PowDomain, at));
    }
    finite(base.powf(exp), at)
}

fn apply_func(func: Func, x: f64, at: usize) -> Result<f64> {
    let y = match func {
        Func::Sin => x.sin(),
        Func::Cos => x.cos(),
        Func::Exp => x.exp(),
        Func::Tanh => x.tanh(),
        Func::Log => {
            if x <= 0.0 {
                return Err(domain(DomainKind::LogNonPositive, at));
            }
            x.ln()
        }
        Func::Sqrt => {
            if x < 0.0 {
                return Err(domain(DomainKind::SqrtNegative, at));
            }
            x.sqrt()
        }
    };
    finite(y, at)
}

impl Expr {
    pub fn num(x: f64) -> Expr {
        Expr::Num(x)
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    pub fn zero() -> Expr {
        Expr::Num(0.0)
    }

    pub fn one() -> Expr {
        Expr::Num(1.0)
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Expr::Num(x) => Some(*x),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(x) if *x == 0.0)
    }

    fn is_one(&self) -> bool {
        matches!(self, Expr::Num(x) if *x == 1.0)
    }

    /// True when evaluation can never raise a domain error (no division,
    /// powers, `log`, `sqrt` or `exp`). Only such subtrees may be dropped by
    /// `0 * e` folding without changing where the expression is defined.
    pub fn is_total(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Var(_) => true,
            Expr::Neg(a) => a.is_total(),
            Expr::Bin { op, lhs, rhs, .. } => {
                matches!(op, BinOp::Add | BinOp::Sub | BinOp::Mul) && lhs.is_total() && rhs.is_total()
            }
            Expr::Call { func, arg, .. } => matches!(func, Func::Sin | Func::Cos | Func::Tanh) && arg.is_total(),
        }
    }

    pub fn depends_on(&self, v: Var) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(w) => *w == v,
            Expr::Neg(a) => a.depends_on(v),
            Expr::Bin { lhs, rhs, .. } => lhs.depends_on(v) || rhs.depends_on(v),
            Expr::Call { arg, .. } => arg.depends_on(v),
        }
    }

    /// Every variable occurring in the expression, sorted and deduplicated.
    pub fn variables(&self) -> Vec<Var> {
        fn walk(e: &Expr, out: &mut Vec<Var>) {
            match e {
                Expr::Num(_) => {}
                Expr::Var(v) => out.push(*v),
                Expr::Neg(a) => walk(a, out),
                Expr::Bin { lhs, rhs, .. } => {
                    walk(lhs, out);
                    walk(rhs, out);
                }
                Expr::Call { arg, .. } => walk(arg, out),
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out.sort();
        out.dedup();
        out
    }

    pub fn eval(&self, b: &Binding<'_>) -> Result<f64> {
        match self {
            Expr::Num(x) => Ok(*x),
            Expr::Var(v) => b.get(*v).ok_or_else(|| Error::UnknownVariable { name: v.to_string(), offset: 0 }),
            Expr::Neg(a) => Ok(-a.eval(b)?),
            Expr::Bin { op, lhs, rhs, at } => {
                let l = lhs.eval(b)?;
                let r = rhs.eval(b)?;
                match op {
                    BinOp::Add => finite(l + r, *at),
                    BinOp::Sub => finite(l - r, *at),
                    BinOp::Mul => finite(l * r, *at),
                    BinOp::Div => {
                        if r == 0.0 {
                            Err(domain(DomainKind::DivisionByZero, *at))
                        } else {
                            finite(l / r, *at)
                        }
                    }
                    BinOp::Pow => checked_pow(l, r, *at),
                }
            }
            Expr::Call { func, arg, at } => apply_func(*func, arg.eval(b)?, *at),
        }
    }

    /// Evaluates against a packed `(q, p, z)` slice for a chart of half-dimension `n`.
    pub fn eval_at(&self, n: usize, values: &[f64]) -> Result<f64> {
        self.eval(&Binding::new(n, values)?)
    }

    // Folding constructors. Each fold reproduces the value the unfolded node
    // would evaluate to, so evaluation is preserved exactly.

    #[allow(clippy::should_implement_trait)]
    pub fn add(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Num(x), Expr::Num(y)) if (x + y).is_finite() => Expr::Num(x + y),
            _ if a.is_zero() => b,
            _ if b.is_zero() => a,
            _ => Expr::Bin { op: BinOp::Add, lhs: Box::new(a), rhs: Box::new(b), at: 0 },
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Num(x), Expr::Num(y)) if (x - y).is_finite() => Expr::Num(x - y),
            _ if b.is_zero() => a,
            _ if a.is_zero() => Expr::neg(b),
            _ => Expr::Bin { op: BinOp::Sub, lhs: Box::new(a), rhs: Box::new(b), at: 0 },
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Num(x), Expr::Num(y)) if (x * y).is_finite() => Expr::Num(x * y),
            _ if a.is_one() => b,
            _ if b.is_one() => a,
            _ if a.is_zero() && b.is_total() => Expr::zero(),
            _ if b.is_zero() && a.is_total() => Expr::zero(),
            _ => Expr::Bin { op: BinOp::Mul, lhs: Box::new(a), rhs: Box::new(b), at: 0 },
        }
    }

    pub fn div_at(a: Expr, b: Expr, at: usize) -> Expr {
        match (&a, &b) {
            (Expr::Num(x), Expr::Num(y)) if *y != 0.0 && (x / y).is_finite() => Expr::Num(x / y),
            _ if b.is_one() => a,
            _ => Expr::Bin { op: BinOp::Div, lhs: Box::new(a), rhs: Box::new(b), at },
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::div_at(a, b, 0)
    }

    pub fn pow_at(a: Expr, b: Expr, at: usize) -> Expr {
        match (&a, &b) {
            (Expr::Num(x), Expr::Num(y)) => match checked_pow(*x, *y, at) {
                Ok(v) => Expr::Num(v),
                Err(_) => Expr::Bin { op: BinOp::Pow, lhs: Box::new(a), rhs: Box::new(b), at },
            },
            _ if b.is_one() => a,
            _ if b.is_zero() && a.is_total() => Expr::one(),
            _ => Expr::Bin { op: BinOp::Pow, lhs: Box::new(a), rhs: Box::new(b), at },
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Num(x) => Expr::Num(-x),
            Expr::Neg(inner) => *inner,
            other => Expr::Neg(Box::new(other)),
        }
    }

    pub fn call_at(func: Func, arg: Expr, at: usize) -> Expr {
        Expr::Call { func, arg: Box::new(arg), at }
    }

    pub fn call(func: Func, arg: Expr) -> Expr {
        Expr::call_at(func, arg, 0)
    }

    /// Symbolic partial derivative with respect to `v`.
    pub fn diff(&self, v: Var) -> Expr {
        diff::diff(self, v)
    }
}

impl fmt::Display for Expr {
    /// Canonical, fully parenthesized infix form. Parsing it back yields an
    /// expression that evaluates identically.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) => {
                if x.is_sign_negative() {
                    write!(f, "(-{:?})", -x)
                } else {
                    write!(f, "{x:?}")
                }
            }
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Bin { op, lhs, rhs, .. } => write!(f, "({lhs} {} {rhs})", op.symbol()),
            Expr::Call { func, arg, .. } => write!(f, "{}({arg})", func.name()),
        }
    }
}

impl Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::add(self, rhs)
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::sub(self, rhs)
    }
}

impl Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::mul(self, rhs)
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}
