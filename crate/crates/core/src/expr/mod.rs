//! Symbolic arithmetic and boolean expressions, concrete states and evaluation.
//!
//! Expressions range over three kinds of symbols: program variables (`Var`),
//! logical parameters introduced during analysis (`Param`, e.g. boundary times
//! `t1` or existential witnesses), and binder-local variables (`Bound`) used for
//! delays, received values and path time inside assertions.

pub(crate) mod poly;
pub mod smt;
mod state;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub use poly::Poly;
pub use state::State;

pub type Rat = BigRational;

pub fn rat(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn frac(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// Converts a finite `f64` to the exact rational it denotes.
pub fn rat_from_f64(x: f64) -> Option<Rat> {
    Rat::from_float(x)
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Parses `-3`, `1.25` or `3/4` (optionally signed) into an exact rational.
pub fn parse_rat(text: &str) -> Option<Rat> {
    let t = text.trim();
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t),
    };
    let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    let value = if let Some((n, d)) = body.split_once('/') {
        if !digits(n) || !digits(d) {
            return None;
        }
        let d: BigInt = d.parse().ok()?;
        if d.is_zero() {
            return None;
        }
        Rat::new(n.parse().ok()?, d)
    } else if let Some((i, f)) = body.split_once('.') {
        if !digits(i) || !digits(f) {
            return None;
        }
        let scale = BigInt::from(10).pow(f.len() as u32);
        let whole: BigInt = format!("{i}{f}").parse().ok()?;
        Rat::new(whole, scale)
    } else {
        if !digits(body) {
            return None;
        }
        Rat::from_integer(body.parse().ok()?)
    };
    Some(if neg { -value } else { value })
}

/// Serde adapter writing rationals as strings (`"0.5"`, `"1/3"`) and
/// reading strings or JSON numbers.
pub mod rat_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    use super::{format_rat, parse_rat, rat_from_f64, Rat};

    pub fn serialize<S: Serializer>(r: &Rat, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rat(r))
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(i64),
        Float(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rat, D::Error> {
        let bad = |what: String| serde::de::Error::custom(format!("invalid rational `{what}`"));
        match Raw::deserialize(d)? {
            Raw::Int(n) => Ok(super::rat(n)),
            Raw::Float(x) => rat_from_f64(x).ok_or_else(|| bad(x.to_string())),
            Raw::Text(t) => parse_rat(&t).ok_or_else(|| bad(t)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("division by zero in `{0}`")]
    DivByZero(String),
    #[error("cannot evaluate quantified formula `{0}`")]
    Quantifier(String),
    #[error("unsupported construct for SMT-LIB export: {0}")]
    Unsupported(String),
    #[error("state merge on overlapping variable `{0}`")]
    Overlap(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoundKind {
    Time,
    Delay,
    Value,
}

/// A binder-local variable. Identity is the numeric id; the kind only guides display.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BoundVar {
    pub kind: BoundKind,
    pub id: u64,
}

static NEXT_BOUND: AtomicU64 = AtomicU64::new(1);

impl BoundVar {
    /// Path time `t` of path assertions and trace paths.
    pub const TIME: BoundVar = BoundVar { kind: BoundKind::Time, id: 0 };

    pub fn fresh(kind: BoundKind) -> BoundVar {
        BoundVar { kind, id: NEXT_BOUND.fetch_add(1, Ordering::Relaxed) }
    }

    pub fn is_time(&self) -> bool {
        *self == BoundVar::TIME
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    Const(Rat),
    Var(String),
    Param(String),
    Bound(BoundVar),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
}

/// A symbol occurring in an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sym<'a> {
    Var(&'a str),
    Param(&'a str),
    Bound(BoundVar),
}

/// Source of values for evaluation.
pub trait Env {
    fn value(&self, sym: Sym<'_>) -> Option<Rat>;
}

impl Env for State {
    fn value(&self, sym: Sym<'_>) -> Option<Rat> {
        match sym {
            Sym::Var(x) => self.lookup(x).cloned(),
            _ => None,
        }
    }
}

/// A state together with parameter and bound-variable valuations.
#[derive(Debug, Clone, Default)]
pub struct Valuation<'a> {
    pub state: Option<&'a State>,
    pub params: BTreeMap<String, Rat>,
    pub bound: BTreeMap<BoundVar, Rat>,
}

impl<'a> Valuation<'a> {
    pub fn new(state: &'a State) -> Self {
        Valuation { state: Some(state), params: BTreeMap::new(), bound: BTreeMap::new() }
    }
}

impl Env for Valuation<'_> {
    fn value(&self, sym: Sym<'_>) -> Option<Rat> {
        match sym {
            Sym::Var(x) => self.state.and_then(|s| s.lookup(x).cloned()),
            Sym::Param(p) => self.params.get(p).cloned(),
            Sym::Bound(b) => self.bound.get(&b).cloned(),
        }
    }
}

fn sym_name(sym: Sym<'_>) -> String {
    match sym {
        Sym::Var(x) | Sym::Param(x) => x.to_string(),
        Sym::Bound(b) => default_bound_name(b),
    }
}

fn default_bound_name(b: BoundVar) -> String {
    match b.kind {
        BoundKind::Time => "t".to_string(),
        BoundKind::Delay => format!("d_{}", b.id),
        BoundKind::Value => format!("v_{}", b.id),
    }
}

impl Expr {
    pub fn int(n: i64) -> Expr {
        Expr::Const(rat(n))
    }

    pub fn constant(r: Rat) -> Expr {
        Expr::Const(r)
    }

    pub fn var(x: &str) -> Expr {
        Expr::Var(x.to_string())
    }

    pub fn param(x: &str) -> Expr {
        Expr::Param(x.to_string())
    }

    pub fn time() -> Expr {
        Expr::Bound(BoundVar::TIME)
    }

    pub fn zero() -> Expr {
        Expr::Const(Rat::zero())
    }

    pub fn pow(self, k: u32) -> Expr {
        Expr::Pow(Box::new(self), k)
    }

    pub fn as_const(&self) -> Option<&Rat> {
        match self {
            Expr::Const(c) => Some(c),
            _ => None,
        }
    }

    /// Applies `f` to every leaf symbol; `Some(r)` replaces the leaf by `r`.
    pub fn map_leaves(&self, f: &mut dyn FnMut(Sym<'_>) -> Option<Expr>) -> Expr {
        match self {
            Expr::Const(_) => self.clone(),
            Expr::Var(x) => f(Sym::Var(x)).unwrap_or_else(|| self.clone()),
            Expr::Param(x) => f(Sym::Param(x)).unwrap_or_else(|| self.clone()),
            Expr::Bound(b) => f(Sym::Bound(*b)).unwrap_or_else(|| self.clone()),
            Expr::Neg(a) => Expr::Neg(Box::new(a.map_leaves(f))),
            Expr::Add(a, b) => Expr::Add(Box::new(a.map_leaves(f)), Box::new(b.map_leaves(f))),
            Expr::Sub(a, b) => Expr::Sub(Box::new(a.map_leaves(f)), Box::new(b.map_leaves(f))),
            Expr::Mul(a, b) => Expr::Mul(Box::new(a.map_leaves(f)), Box::new(b.map_leaves(f))),
            Expr::Div(a, b) => Expr::Div(Box::new(a.map_leaves(f)), Box::new(b.map_leaves(f))),
            Expr::Pow(a, k) => Expr::Pow(Box::new(a.map_leaves(f)), *k),
        }
    }

    pub fn visit_leaves(&self, f: &mut dyn FnMut(Sym<'_>)) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(x) => f(Sym::Var(x)),
            Expr::Param(x) => f(Sym::Param(x)),
            Expr::Bound(b) => f(Sym::Bound(*b)),
            Expr::Neg(a) | Expr::Pow(a, _) => a.visit_leaves(f),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.visit_leaves(f);
                b.visit_leaves(f);
            }
        }
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit_leaves(&mut |s| {
            if let Sym::Var(x) = s {
                out.insert(x.to_string());
            }
        });
        out
    }

    pub fn params(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit_leaves(&mut |s| {
            if let Sym::Param(x) = s {
                out.insert(x.to_string());
            }
        });
        out
    }

    pub fn bounds(&self) -> BTreeSet<BoundVar> {
        let mut out = BTreeSet::new();
        self.visit_leaves(&mut |s| {
            if let Sym::Bound(b) = s {
                out.insert(b);
            }
        });
        out
    }

    pub fn mentions_var(&self, x: &str) -> bool {
        let mut found = false;
        self.visit_leaves(&mut |s| found |= s == Sym::Var(x));
        found
    }

    pub fn mentions_bound(&self, b: BoundVar) -> bool {
        let mut found = false;
        self.visit_leaves(&mut |s| found |= s == Sym::Bound(b));
        found
    }

    /// Replaces program variable `x` by `r` (no simplification).
    pub fn substitute(&self, x: &str, r: &Expr) -> Expr {
        self.map_leaves(&mut |s| match s {
            Sym::Var(y) if y == x => Some(r.clone()),
            _ => None,
        })
    }

    /// Simultaneous substitution of program variables.
    pub fn subst_vars(&self, sigma: &BTreeMap<String, Expr>) -> Expr {
        if sigma.is_empty() {
            return self.clone();
        }
        self.map_leaves(&mut |s| match s {
            Sym::Var(y) => sigma.get(y).cloned(),
            _ => None,
        })
    }

    pub fn subst_bound(&self, sigma: &BTreeMap<BoundVar, Expr>) -> Expr {
        if sigma.is_empty() {
            return self.clone();
        }
        self.map_leaves(&mut |s| match s {
            Sym::Bound(b) => sigma.get(&b).cloned(),
            _ => None,
        })
    }

    pub fn subst_params(&self, sigma: &BTreeMap<String, Expr>) -> Expr {
        if sigma.is_empty() {
            return self.clone();
        }
        self.map_leaves(&mut |s| match s {
            Sym::Param(p) => sigma.get(p).cloned(),
            _ => None,
        })
    }

    pub fn rename_vars(&self, f: &dyn Fn(&str) -> String) -> Expr {
        self.map_leaves(&mut |s| match s {
            Sym::Var(y) => Some(Expr::Var(f(y))),
            _ => None,
        })
    }

    /// Replaces every symbol the environment knows by its value, then simplifies.
    pub fn partial_eval(&self, env: &dyn Env) -> Expr {
        self.map_leaves(&mut |s| env.value(s).map(Expr::Const)).simplify()
    }

    pub fn simplify(&self) -> Expr {
        Poly::from_expr(self).to_expr()
    }

    /// Exact polynomial-identity test (both sides simplified).
    pub fn equiv(&self, other: &Expr) -> bool {
        Poly::from_expr(&Expr::Sub(Box::new(self.clone()), Box::new(other.clone()))).is_zero()
    }

    pub fn eval(&self, env: &dyn Env) -> Result<Rat, ExprError> {
        match self {
            Expr::Const(c) => Ok(c.clone()),
            Expr::Var(x) => env.value(Sym::Var(x)).ok_or_else(|| ExprError::Unbound(x.clone())),
            Expr::Param(x) => env.value(Sym::Param(x)).ok_or_else(|| ExprError::Unbound(x.clone())),
            Expr::Bound(b) => env.value(Sym::Bound(*b)).ok_or_else(|| ExprError::Unbound(sym_name(Sym::Bound(*b)))),
            Expr::Neg(a) => Ok(-a.eval(env)?),
            Expr::Add(a, b) => Ok(a.eval(env)? + b.eval(env)?),
            Expr::Sub(a, b) => Ok(a.eval(env)? - b.eval(env)?),
            Expr::Mul(a, b) => Ok(a.eval(env)? * b.eval(env)?),
            Expr::Div(a, b) => {
                let n = a.eval(env)?;
                let d = b.eval(env)?;
                if d.is_zero() {
                    return Err(ExprError::DivByZero(self.to_string()));
                }
                Ok(n / d)
            }
            Expr::Pow(a, k) => {
                let base = a.eval(env)?;
                let mut acc = Rat::one();
                for _ in 0..*k {
                    acc *= &base;
                }
                Ok(acc)
            }
        }
    }

    /// Derivative with respect to a bound variable (polynomial fragment; quotient rule otherwise).
    pub fn diff(&self, x: BoundVar) -> Expr {
        let zero = Expr::zero;
        match self {
            Expr::Const(_) | Expr::Var(_) | Expr::Param(_) => zero(),
            Expr::Bound(b) => {
                if *b == x {
                    Expr::int(1)
                } else {
                    zero()
                }
            }
            Expr::Neg(a) => Expr::Neg(Box::new(a.diff(x))),
            Expr::Add(a, b) => Expr::Add(Box::new(a.diff(x)), Box::new(b.diff(x))),
            Expr::Sub(a, b) => Expr::Sub(Box::new(a.diff(x)), Box::new(b.diff(x))),
            Expr::Mul(a, b) => (a.diff(x) * (**b).clone()) + ((**a).clone() * b.diff(x)),
            Expr::Div(a, b) => {
                let num = (a.diff(x) * (**b).clone()) - ((**a).clone() * b.diff(x));
                num / (**b).clone().pow(2)
            }
            Expr::Pow(a, k) => {
                if *k == 0 {
                    zero()
                } else {
                    Expr::int(*k as i64) * (**a).clone().pow(k - 1) * a.diff(x)
                }
            }
        }
        .simplify()
    }

    pub fn display_with<'a>(&'a self, names: &'a dyn BoundNames) -> ExprDisplay<'a> {
        ExprDisplay { e: self, names }
    }
}

macro_rules! expr_binop {
    ($tr:ident, $m:ident, $ctor:ident) => {
        impl std::ops::$tr for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                Expr::$ctor(Box::new(self), Box::new(rhs))
            }
        }
    };
}
expr_binop!(Add, add, Add);
expr_binop!(Sub, sub, Sub);
expr_binop!(Mul, mul, Mul);
expr_binop!(Div, div, Div);

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

/// Display names for bound variables.
pub trait BoundNames {
    fn name(&self, b: BoundVar) -> String;
}

pub struct DefaultNames;

impl BoundNames for DefaultNames {
    fn name(&self, b: BoundVar) -> String {
        default_bound_name(b)
    }
}

pub struct ExprDisplay<'a> {
    e: &'a Expr,
    names: &'a dyn BoundNames,
}

const PREC_SUM: u8 = 1;
const PREC_PROD: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Const(c) => {
            if c.is_negative() {
                PREC_NEG
            } else if c.is_integer() || is_decimal(c) {
                PREC_ATOM
            } else {
                PREC_PROD
            }
        }
        Expr::Var(_) | Expr::Param(_) | Expr::Bound(_) => PREC_ATOM,
        Expr::Neg(_) => PREC_NEG,
        Expr::Add(..) | Expr::Sub(..) => PREC_SUM,
        Expr::Mul(..) | Expr::Div(..) => PREC_PROD,
        Expr::Pow(..) => PREC_POW,
    }
}

fn is_decimal(c: &Rat) -> bool {
    let mut d = c.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    while (&d % &two).is_zero() {
        d /= &two;
    }
    while (&d % &five).is_zero() {
        d /= &five;
    }
    d.is_one()
}

/// Renders a non-negative rational as an integer or exact decimal literal,
/// falling back to `p/q`.
pub fn format_rat(c: &Rat) -> String {
    if c.is_integer() {
        return c.numer().to_string();
    }
    if !is_decimal(c) {
        return format!("{}/{}", c.numer(), c.denom());
    }
    let neg = c.is_negative();
    let a = c.abs();
    let int = a.numer() / a.denom();
    let mut rem = a.numer() % a.denom();
    let ten = BigInt::from(10);
    let mut digits = String::new();
    while !rem.is_zero() {
        rem *= &ten;
        digits.push_str(&(&rem / a.denom()).to_string());
        rem %= a.denom();
    }
    format!("{}{}.{}", if neg { "-" } else { "" }, int, digits)
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(self.e, self.names, f)
    }
}

fn write_child(e: &Expr, names: &dyn BoundNames, paren: bool, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if paren {
        write!(f, "(")?;
        write_expr(e, names, f)?;
        write!(f, ")")
    } else {
        write_expr(e, names, f)
    }
}

fn write_expr(e: &Expr, names: &dyn BoundNames, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e {
        Expr::Const(c) => write!(f, "{}", format_rat(c)),
        Expr::Var(x) | Expr::Param(x) => write!(f, "{x}"),
        Expr::Bound(b) => write!(f, "{}", names.name(*b)),
        Expr::Neg(a) => {
            write!(f, "-")?;
            write_child(a, names, prec(a) <= PREC_NEG, f)
        }
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
            let (p, op) = match e {
                Expr::Add(..) => (PREC_SUM, "+"),
                Expr::Sub(..) => (PREC_SUM, "-"),
                Expr::Mul(..) => (PREC_PROD, "*"),
                _ => (PREC_PROD, "/"),
            };
            write_child(a, names, prec(a) < p, f)?;
            write!(f, "{op}")?;
            write_child(b, names, prec(b) <= p, f)
        }
        Expr::Pow(a, k) => {
            write_child(a, names, prec(a) <= PREC_POW, f)?;
            write!(f, "^{k}")
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(self, &DefaultNames, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CmpOp {
    Eq,
    Le,
    Lt,
    Ge,
    Gt,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Le => "<=",
            CmpOp::Lt => "<",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }

    pub fn holds(self, a: &Rat, b: &Rat) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Le => a <= b,
            CmpOp::Lt => a < b,
            CmpOp::Ge => a >= b,
            CmpOp::Gt => a > b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BExpr {
    True,
    False,
    Cmp(CmpOp, Expr, Expr),
    Not(Box<BExpr>),
    And(Box<BExpr>, Box<BExpr>),
    Or(Box<BExpr>, Box<BExpr>),
    Implies(Box<BExpr>, Box<BExpr>),
    /// Existential over logical parameters.
    Exists(Vec<String>, Box<BExpr>),
}

impl BExpr {
    pub fn cmp(op: CmpOp, a: Expr, b: Expr) -> BExpr {
        BExpr::Cmp(op, a, b)
    }

    pub fn eq(a: Expr, b: Expr) -> BExpr {
        BExpr::Cmp(CmpOp::Eq, a, b)
    }

    pub fn le(a: Expr, b: Expr) -> BExpr {
        BExpr::Cmp(CmpOp::Le, a, b)
    }

    pub fn lt(a: Expr, b: Expr) -> BExpr {
        BExpr::Cmp(CmpOp::Lt, a, b)
    }

    pub fn ge(a: Expr, b: Expr) -> BExpr {
        BExpr::Cmp(CmpOp::Ge, a, b)
    }

    pub fn gt(a: Expr, b: Expr) -> BExpr {
        BExpr::Cmp(CmpOp::Gt, a, b)
    }

    pub fn not(b: BExpr) -> BExpr {
        BExpr::Not(Box::new(b))
    }

    pub fn and(a: BExpr, b: BExpr) -> BExpr {
        BExpr::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: BExpr, b: BExpr) -> BExpr {
        BExpr::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: BExpr, b: BExpr) -> BExpr {
        BExpr::Implies(Box::new(a), Box::new(b))
    }

    /// Conjunction that folds `true` units.
    pub fn and_s(a: BExpr, b: BExpr) -> BExpr {
        match (a, b) {
            (BExpr::True, x) | (x, BExpr::True) => x,
            (BExpr::False, _) | (_, BExpr::False) => BExpr::False,
            (x, y) => BExpr::and(x, y),
        }
    }

    pub fn or_s(a: BExpr, b: BExpr) -> BExpr {
        match (a, b) {
            (BExpr::False, x) | (x, BExpr::False) => x,
            (BExpr::True, _) | (_, BExpr::True) => BExpr::True,
            (x, y) => BExpr::or(x, y),
        }
    }

    pub fn conj(items: impl IntoIterator<Item = BExpr>) -> BExpr {
        items.into_iter().fold(BExpr::True, BExpr::and_s)
    }

    pub fn disj(items: impl IntoIterator<Item = BExpr>) -> BExpr {
        items.into_iter().fold(BExpr::False, BExpr::or_s)
    }

    pub fn map_exprs(&self, f: &mut dyn FnMut(&Expr) -> Expr) -> BExpr {
        match self {
            BExpr::True | BExpr::False => self.clone(),
            BExpr::Cmp(op, a, b) => BExpr::Cmp(*op, f(a), f(b)),
            BExpr::Not(a) => BExpr::not(a.map_exprs(f)),
            BExpr::And(a, b) => BExpr::and(a.map_exprs(f), b.map_exprs(f)),
            BExpr::Or(a, b) => BExpr::or(a.map_exprs(f), b.map_exprs(f)),
            BExpr::Implies(a, b) => BExpr::implies(a.map_exprs(f), b.map_exprs(f)),
            BExpr::Exists(vs, a) => BExpr::Exists(vs.clone(), Box::new(a.map_exprs(f))),
        }
    }

    pub fn visit_exprs(&self, f: &mut dyn FnMut(&Expr)) {
        match self {
            BExpr::True | BExpr::False => {}
            BExpr::Cmp(_, a, b) => {
                f(a);
                f(b);
            }
            BExpr::Not(a) | BExpr::Exists(_, a) => a.visit_exprs(f),
            BExpr::And(a, b) | BExpr::Or(a, b) | BExpr::Implies(a, b) => {
                a.visit_exprs(f);
                b.visit_exprs(f);
            }
        }
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit_exprs(&mut |e| out.extend(e.vars()));
        out
    }

    /// Free parameters (existentially bound ones excluded).
    pub fn params(&self) -> BTreeSet<String> {
        match self {
            BExpr::Exists(vs, a) => {
                let mut inner = a.params();
                for v in vs {
                    inner.remove(v);
                }
                inner
            }
            BExpr::Not(a) => a.params(),
            BExpr::And(a, b) | BExpr::Or(a, b) | BExpr::Implies(a, b) => {
                let mut s = a.params();
                s.extend(b.params());
                s
            }
            _ => {
                let mut out = BTreeSet::new();
                self.visit_exprs(&mut |e| out.extend(e.params()));
                out
            }
        }
    }

    pub fn bounds(&self) -> BTreeSet<BoundVar> {
        let mut out = BTreeSet::new();
        self.visit_exprs(&mut |e| out.extend(e.bounds()));
        out
    }

    pub fn substitute(&self, x: &str, r: &Expr) -> BExpr {
        self.map_exprs(&mut |e| e.substitute(x, r))
    }

    pub fn subst_vars(&self, sigma: &BTreeMap<String, Expr>) -> BExpr {
        if sigma.is_empty() {
            return self.clone();
        }
        self.map_exprs(&mut |e| e.subst_vars(sigma))
    }

    pub fn subst_bound(&self, sigma: &BTreeMap<BoundVar, Expr>) -> BExpr {
        if sigma.is_empty() {
            return self.clone();
        }
        self.map_exprs(&mut |e| e.subst_bound(sigma))
    }

    pub fn subst_params(&self, sigma: &BTreeMap<String, Expr>) -> BExpr {
        if sigma.is_empty() {
            return self.clone();
        }
        self.map_exprs(&mut |e| e.subst_params(sigma))
    }

    pub fn rename_vars(&self, f: &dyn Fn(&str) -> String) -> BExpr {
        self.map_exprs(&mut |e| e.rename_vars(f))
    }

    pub fn partial_eval(&self, env: &dyn Env) -> BExpr {
        self.map_exprs(&mut |e| e.partial_eval(env)).simplify()
    }

    /// Simplifies both sides of every comparison and folds constant structure.
    pub fn simplify(&self) -> BExpr {
        match self {
            BExpr::True | BExpr::False => self.clone(),
            BExpr::Cmp(op, a, b) => {
                let diff = Poly::from_expr(&(a.clone() - b.clone()));
                if let Some(c) = diff.as_const() {
                    return if op.holds(&c, &Rat::zero()) { BExpr::True } else { BExpr::False };
                }
                BExpr::Cmp(*op, a.simplify(), b.simplify())
            }
            BExpr::Not(a) => match a.simplify() {
                BExpr::True => BExpr::False,
                BExpr::False => BExpr::True,
                BExpr::Not(inner) => *inner,
                x => BExpr::not(x),
            },
            BExpr::And(a, b) => BExpr::and_s(a.simplify(), b.simplify()),
            BExpr::Or(a, b) => BExpr::or_s(a.simplify(), b.simplify()),
            BExpr::Implies(a, b) => match (a.simplify(), b.simplify()) {
                (BExpr::False, _) | (_, BExpr::True) => BExpr::True,
                (BExpr::True, y) => y,
                (x, BExpr::False) => BExpr::not(x).simplify(),
                (x, y) => BExpr::implies(x, y),
            },
            BExpr::Exists(vs, a) => {
                let body = a.simplify();
                let used = body.params();
                let vs: Vec<String> = vs.iter().filter(|v| used.contains(*v)).cloned().collect();
                if vs.is_empty() || matches!(body, BExpr::True | BExpr::False) {
                    body
                } else {
                    BExpr::Exists(vs, Box::new(body))
                }
            }
        }
    }

    /// Negation normal form: negations only directly above comparisons are removed
    /// by flipping the operator; equalities negate to a strict disjunction.
    pub fn nnf(&self) -> BExpr {
        self.nnf_pol(true)
    }

    fn nnf_pol(&self, positive: bool) -> BExpr {
        match (self, positive) {
            (BExpr::True, true) | (BExpr::False, false) => BExpr::True,
            (BExpr::True, false) | (BExpr::False, true) => BExpr::False,
            (BExpr::Cmp(..), true) => self.clone(),
            (BExpr::Cmp(op, a, b), false) => match op {
                CmpOp::Eq => BExpr::or(BExpr::lt(a.clone(), b.clone()), BExpr::gt(a.clone(), b.clone())),
                CmpOp::Le => BExpr::gt(a.clone(), b.clone()),
                CmpOp::Lt => BExpr::ge(a.clone(), b.clone()),
                CmpOp::Ge => BExpr::lt(a.clone(), b.clone()),
                CmpOp::Gt => BExpr::le(a.clone(), b.clone()),
            },
            (BExpr::Not(a), p) => a.nnf_pol(!p),
            (BExpr::And(a, b), true) => BExpr::and(a.nnf_pol(true), b.nnf_pol(true)),
            (BExpr::And(a, b), false) => BExpr::or(a.nnf_pol(false), b.nnf_pol(false)),
            (BExpr::Or(a, b), true) => BExpr::or(a.nnf_pol(true), b.nnf_pol(true)),
            (BExpr::Or(a, b), false) => BExpr::and(a.nnf_pol(false), b.nnf_pol(false)),
            (BExpr::Implies(a, b), true) => BExpr::or(a.nnf_pol(false), b.nnf_pol(true)),
            (BExpr::Implies(a, b), false) => BExpr::and(a.nnf_pol(true), b.nnf_pol(false)),
            (BExpr::Exists(vs, a), true) => BExpr::Exists(vs.clone(), Box::new(a.nnf_pol(true))),
            (BExpr::Exists(..), false) => BExpr::not(self.nnf_pol(true)),
        }
    }

    pub fn eval(&self, env: &dyn Env) -> Result<bool, ExprError> {
        match self {
            BExpr::True => Ok(true),
            BExpr::False => Ok(false),
            BExpr::Cmp(op, a, b) => Ok(op.holds(&a.eval(env)?, &b.eval(env)?)),
            BExpr::Not(a) => Ok(!a.eval(env)?),
            BExpr::And(a, b) => Ok(a.eval(env)? && b.eval(env)?),
            BExpr::Or(a, b) => Ok(a.eval(env)? || b.eval(env)?),
            BExpr::Implies(a, b) => Ok(!a.eval(env)? || b.eval(env)?),
            BExpr::Exists(..) => Err(ExprError::Quantifier(self.to_string())),
        }
    }

    /// Top-level conjuncts.
    pub fn conjuncts(&self) -> Vec<&BExpr> {
        match self {
            BExpr::And(a, b) => {
                let mut v = a.conjuncts();
                v.extend(b.conjuncts());
                v
            }
            BExpr::True => vec![],
            _ => vec![self],
        }
    }

    pub fn display_with<'a>(&'a self, names: &'a dyn BoundNames) -> BExprDisplay<'a> {
        BExprDisplay { b: self, names }
    }
}

pub struct BExprDisplay<'a> {
    b: &'a BExpr,
    names: &'a dyn BoundNames,
}

fn bprec(b: &BExpr) -> u8 {
    match b {
        BExpr::Implies(..) => 1,
        BExpr::Or(..) => 2,
        BExpr::And(..) => 3,
        BExpr::Exists(..) => 0,
        BExpr::Not(_) => 4,
        _ => 5,
    }
}

fn write_bchild(b: &BExpr, names: &dyn BoundNames, paren: bool, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if paren {
        write!(f, "(")?;
        write_bexpr(b, names, f)?;
        write!(f, ")")
    } else {
        write_bexpr(b, names, f)
    }
}

fn write_bexpr(b: &BExpr, names: &dyn BoundNames, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match b {
        BExpr::True => write!(f, "true"),
        BExpr::False => write!(f, "false"),
        BExpr::Cmp(op, x, y) => {
            write!(f, "{} {} {}", x.display_with(names), op.symbol(), y.display_with(names))
        }
        BExpr::Not(a) => {
            write!(f, "!")?;
            write_bchild(a, names, bprec(a) < 5 || matches!(**a, BExpr::Cmp(..)), f)
        }
        BExpr::And(x, y) | BExpr::Or(x, y) | BExpr::Implies(x, y) => {
            let (p, op, right_assoc) = match b {
                BExpr::And(..) => (3, "&&", false),
                BExpr::Or(..) => (2, "||", false),
                _ => (1, "-->", true),
            };
            let lp = if right_assoc { bprec(x) <= p } else { bprec(x) < p };
            let rp = if right_assoc { bprec(y) < p } else { bprec(y) <= p };
            write_bchild(x, names, lp, f)?;
            write!(f, " {op} ")?;
            write_bchild(y, names, rp, f)
        }
        BExpr::Exists(vs, a) => {
            write!(f, "exists {}. ", vs.join(" "))?;
            write_bexpr(a, names, f)
        }
    }
}

impl fmt::Display for BExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_bexpr(self.b, self.names, f)
    }
}

impl fmt::Display for BExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_bexpr(self, &DefaultNames, f)
    }
}
