//! Polynomial normal form used by `simplify`.
//!
//! Divisions by non-constant denominators are kept as opaque atoms whose
//! numerator and denominator are themselves in normal form.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};

use super::{BoundVar, Expr, Rat};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Atom {
    Var(String),
    Param(String),
    Bound(BoundVar),
    Opaque(Box<Expr>),
}

impl Atom {
    fn to_expr(&self) -> Expr {
        match self {
            Atom::Var(x) => Expr::Var(x.clone()),
            Atom::Param(x) => Expr::Param(x.clone()),
            Atom::Bound(b) => Expr::Bound(*b),
            Atom::Opaque(e) => (**e).clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Mono(BTreeMap<Atom, u32>);

impl Mono {
    fn one() -> Mono {
        Mono(BTreeMap::new())
    }

    pub(crate) fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub(crate) fn degree(&self) -> u32 {
        self.0.values().sum()
    }

    /// Every exponent even, so the monomial is non-negative.
    pub(crate) fn is_square(&self) -> bool {
        !self.0.is_empty() && self.0.values().all(|k| k % 2 == 0)
    }

    fn mul(&self, other: &Mono) -> Mono {
        let mut m = self.0.clone();
        for (a, k) in &other.0 {
            *m.entry(a.clone()).or_insert(0) += k;
        }
        Mono(m)
    }
}

impl Ord for Mono {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| self.0.iter().cmp(other.0.iter()))
    }
}

impl PartialOrd for Mono {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Poly(BTreeMap<Mono, Rat>);

impl Poly {
    fn constant(c: Rat) -> Poly {
        let mut m = BTreeMap::new();
        if !c.is_zero() {
            m.insert(Mono::one(), c);
        }
        Poly(m)
    }

    fn atom(a: Atom) -> Poly {
        let mut mono = BTreeMap::new();
        mono.insert(a, 1);
        let mut m = BTreeMap::new();
        m.insert(Mono(mono), Rat::one());
        Poly(m)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub(crate) fn terms(&self) -> impl Iterator<Item = (&Mono, &Rat)> {
        self.0.iter()
    }

    pub fn as_const(&self) -> Option<Rat> {
        match self.0.len() {
            0 => Some(Rat::zero()),
            1 => self.0.get(&Mono::one()).cloned(),
            _ => None,
        }
    }

    fn add(mut self, other: &Poly) -> Poly {
        for (m, c) in &other.0 {
            let entry = self.0.entry(m.clone()).or_insert_with(Rat::zero);
            *entry += c;
            if entry.is_zero() {
                self.0.remove(m);
            }
        }
        self
    }

    fn scale(mut self, k: &Rat) -> Poly {
        if k.is_zero() {
            return Poly::constant(Rat::zero());
        }
        for c in self.0.values_mut() {
            *c *= k;
        }
        self
    }

    fn mul(&self, other: &Poly) -> Poly {
        let mut acc = Poly::constant(Rat::zero());
        for (m1, c1) in &self.0 {
            for (m2, c2) in &other.0 {
                let mut single = BTreeMap::new();
                single.insert(m1.mul(m2), c1 * c2);
                acc = acc.add(&Poly(single));
            }
        }
        acc
    }

    pub fn from_expr(e: &Expr) -> Poly {
        match e {
            Expr::Const(c) => Poly::constant(c.clone()),
            Expr::Var(x) => Poly::atom(Atom::Var(x.clone())),
            Expr::Param(x) => Poly::atom(Atom::Param(x.clone())),
            Expr::Bound(b) => Poly::atom(Atom::Bound(*b)),
            Expr::Neg(a) => Poly::from_expr(a).scale(&-Rat::one()),
            Expr::Add(a, b) => Poly::from_expr(a).add(&Poly::from_expr(b)),
            Expr::Sub(a, b) => Poly::from_expr(a).add(&Poly::from_expr(b).scale(&-Rat::one())),
            Expr::Mul(a, b) => Poly::from_expr(a).mul(&Poly::from_expr(b)),
            Expr::Div(a, b) => {
                let num = Poly::from_expr(a);
                let den = Poly::from_expr(b);
                match den.as_const() {
                    Some(c) if !c.is_zero() => num.scale(&(Rat::one() / c)),
                    _ => {
                        let opaque = Expr::Div(Box::new(num.to_expr()), Box::new(den.to_expr()));
                        Poly::atom(Atom::Opaque(Box::new(opaque)))
                    }
                }
            }
            Expr::Pow(a, k) => {
                let base = Poly::from_expr(a);
                let mut acc = Poly::constant(Rat::one());
                for _ in 0..*k {
                    acc = acc.mul(&base);
                }
                acc
            }
        }
    }

    pub fn to_expr(&self) -> Expr {
        let mut out: Option<Expr> = None;
        for (m, c) in &self.0 {
            let negative = c.is_negative();
            out = Some(match out {
                None => term(m, c),
                Some(acc) if negative => Expr::Sub(Box::new(acc), Box::new(term(m, &-c))),
                Some(acc) => Expr::Add(Box::new(acc), Box::new(term(m, c))),
            });
        }
        out.unwrap_or_else(Expr::zero)
    }
}

fn term(m: &Mono, c: &Rat) -> Expr {
    if m.0.is_empty() {
        return Expr::Const(c.clone());
    }
    let unit = c.is_one() || (-c).is_one();
    let mut prod: Option<Expr> = if unit { None } else { Some(Expr::Const(c.clone())) };
    for (a, k) in &m.0 {
        let f = if *k == 1 { a.to_expr() } else { Expr::Pow(Box::new(a.to_expr()), *k) };
        prod = Some(match prod {
            None => f,
            Some(p) => Expr::Mul(Box::new(p), Box::new(f)),
        });
    }
    let p = prod.expect("non-empty monomial");
    if unit && c.is_negative() {
        Expr::Neg(Box::new(p))
    } else {
        p
    }
}
