//! Satisfiability of boolean combinations of polynomial constraints by
//! Fourier-Motzkin elimination over the linear relaxation.
//!
//! Every distinct non-constant monomial is treated as an independent real
//! unknown (even-power monomials are additionally non-negative). The answer
//! is exact when all constraints are linear; otherwise only `Unsat` is
//! conclusive.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{Signed, Zero};

use crate::expr::poly::Mono;
use crate::expr::{BExpr, CmpOp, Expr, Poly, Rat};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feasibility {
    Unsat,
    Sat,
    Unknown,
}

/// Budget on the number of disjunctive cases and derived constraints.
const MAX_CUBES: usize = 4096;
const MAX_ROWS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Rel {
    /// `= 0`
    Eq,
    /// `>= 0`
    Ge,
    /// `> 0`
    Gt,
}

/// `Σ coeffs[i]·xᵢ + k  rel  0`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Row {
    coeffs: BTreeMap<usize, Rat>,
    k: Rat,
    rel: Rel,
}

impl Row {
    /// Scales so that the leading coefficient has magnitude one, for dedup.
    fn normalized(mut self) -> Row {
        if let Some(lead) = self.coeffs.values().next().cloned() {
            let s = lead.abs();
            let s = if self.rel == Rel::Eq { lead } else { s };
            for c in self.coeffs.values_mut() {
                *c /= &s;
            }
            self.k /= &s;
        }
        self
    }

    /// `None` when the row has no unknowns left: `Some(truth)` otherwise.
    fn constant_truth(&self) -> Option<bool> {
        if !self.coeffs.is_empty() {
            return None;
        }
        Some(match self.rel {
            Rel::Eq => self.k.is_zero(),
            Rel::Ge => !self.k.is_negative(),
            Rel::Gt => self.k.is_positive(),
        })
    }
}

#[derive(Default)]
struct Atoms {
    index: BTreeMap<Mono, usize>,
    nonlinear: bool,
    squares: BTreeSet<usize>,
}

impl Atoms {
    fn row(&mut self, p: &Poly, rel: Rel) -> Row {
        let mut coeffs = BTreeMap::new();
        let mut k = Rat::zero();
        for (m, c) in p.terms() {
            if m.is_one() {
                k = c.clone();
                continue;
            }
            if m.degree() > 1 {
                self.nonlinear = true;
            }
            let next = self.index.len();
            let i = *self.index.entry(m.clone()).or_insert(next);
            if m.is_square() {
                self.squares.insert(i);
            }
            coeffs.insert(i, c.clone());
        }
        Row { coeffs, k, rel }
    }
}

/// Literal `l op r` as a row.
fn literal(op: CmpOp, l: &Expr, r: &Expr, atoms: &mut Atoms) -> Row {
    let diff = |a: &Expr, b: &Expr| Poly::from_expr(&(a.clone() - b.clone()));
    match op {
        CmpOp::Eq => atoms.row(&diff(l, r), Rel::Eq),
        CmpOp::Ge => atoms.row(&diff(l, r), Rel::Ge),
        CmpOp::Gt => atoms.row(&diff(l, r), Rel::Gt),
        CmpOp::Le => atoms.row(&diff(r, l), Rel::Ge),
        CmpOp::Lt => atoms.row(&diff(r, l), Rel::Gt),
    }
}

/// Disjunctive normal form over literals, or `None` past the budget or on
/// an unsupported connective.
fn dnf(b: &BExpr) -> Option<Vec<Vec<(CmpOp, Expr, Expr)>>> {
    Some(match b {
        BExpr::True => vec![vec![]],
        BExpr::False => vec![],
        BExpr::Cmp(op, l, r) => vec![vec![(*op, l.clone(), r.clone())]],
        BExpr::And(x, y) => {
            let a = dnf(x)?;
            let c = dnf(y)?;
            if a.len() * c.len() > MAX_CUBES {
                return None;
            }
            let mut out = Vec::with_capacity(a.len() * c.len());
            for p in &a {
                for q in &c {
                    let mut cube = p.clone();
                    cube.extend(q.iter().cloned());
                    out.push(cube);
                }
            }
            out
        }
        BExpr::Or(x, y) => {
            let mut a = dnf(x)?;
            a.extend(dnf(y)?);
            if a.len() > MAX_CUBES {
                return None;
            }
            a
        }
        // Bound names are distinct symbols, so the existential is transparent
        // for satisfiability.
        BExpr::Exists(_, a) => dnf(a)?,
        BExpr::Not(_) | BExpr::Implies(..) => return None,
    })
}

/// Decides satisfiability of `b` (free symbols existentially read).
pub fn check(b: &BExpr) -> Feasibility {
    let Some(cubes) = dnf(&b.nnf()) else { return Feasibility::Unknown };
    let mut unknown = false;
    for cube in cubes {
        let mut atoms = Atoms::default();
        let mut rows: Vec<Row> = cube.iter().map(|(op, l, r)| literal(*op, l, r, &mut atoms)).collect();
        for &i in &atoms.squares {
            rows.push(Row { coeffs: BTreeMap::from([(i, Rat::from_integer(1.into()))]), k: Rat::zero(), rel: Rel::Ge });
        }
        match eliminate(rows) {
            Some(true) if !atoms.nonlinear => return Feasibility::Sat,
            Some(false) => {}
            _ => unknown = true,
        }
    }
    if unknown {
        Feasibility::Unknown
    } else {
        Feasibility::Unsat
    }
}

/// `Some(false)` if the rows are infeasible over the reals, `Some(true)` if
/// feasible, `None` past the budget.
fn eliminate(rows: Vec<Row>) -> Option<bool> {
    let mut rows: Vec<Row> = rows;
    // Equalities: Gaussian elimination.
    loop {
        let Some(pos) = rows.iter().position(|r| r.rel == Rel::Eq && !r.coeffs.is_empty()) else { break };
        let eq = rows.swap_remove(pos);
        let (&x, cx) = eq.coeffs.iter().next().expect("non-empty");
        let cx = cx.clone();
        rows = rows.into_iter().map(|r| substitute(r, x, &eq, &cx)).collect();
    }
    let mut set: BTreeSet<Row> = BTreeSet::new();
    for r in rows {
        match r.constant_truth() {
            Some(false) => return Some(false),
            Some(true) => {}
            None => {
                set.insert(r.normalized());
            }
        }
    }
    loop {
        let vars: BTreeSet<usize> = set.iter().flat_map(|r| r.coeffs.keys().copied()).collect();
        let Some(x) = vars.iter().copied().min_by_key(|x| {
            let pos = set.iter().filter(|r| r.coeffs.get(x).is_some_and(|c| c.is_positive())).count();
            let neg = set.iter().filter(|r| r.coeffs.get(x).is_some_and(|c| c.is_negative())).count();
            pos * neg
        }) else {
            return Some(true);
        };
        let (with, without): (Vec<Row>, Vec<Row>) = set.into_iter().partition(|r| r.coeffs.contains_key(&x));
        let (pos, neg): (Vec<Row>, Vec<Row>) = with.into_iter().partition(|r| r.coeffs[&x].is_positive());
        let mut next: BTreeSet<Row> = without.into_iter().collect();
        for p in &pos {
            for n in &neg {
                let a = p.coeffs[&x].clone();
                let b = -n.coeffs[&x].clone();
                let r = combine(p, &b, n, &a, x);
                match r.constant_truth() {
                    Some(false) => return Some(false),
                    Some(true) => {}
                    None => {
                        next.insert(r.normalized());
                    }
                }
                if next.len() > MAX_ROWS {
                    return None;
                }
            }
        }
        set = next;
    }
}

/// `b·p + a·n`, dropping `x`.
fn combine(p: &Row, b: &Rat, n: &Row, a: &Rat, x: usize) -> Row {
    let mut coeffs: BTreeMap<usize, Rat> = BTreeMap::new();
    for (i, c) in &p.coeffs {
        *coeffs.entry(*i).or_insert_with(Rat::zero) += c * b;
    }
    for (i, c) in &n.coeffs {
        *coeffs.entry(*i).or_insert_with(Rat::zero) += c * a;
    }
    coeffs.remove(&x);
    coeffs.retain(|_, c| !c.is_zero());
    let rel = if p.rel == Rel::Gt || n.rel == Rel::Gt { Rel::Gt } else { Rel::Ge };
    Row { coeffs, k: &p.k * b + &n.k * a, rel }
}

/// Eliminates `x` from `r` using `eq` (`cx·x + rest = 0`).
fn substitute(r: Row, x: usize, eq: &Row, cx: &Rat) -> Row {
    let Some(cr) = r.coeffs.get(&x).cloned() else { return r };
    let f = cr / cx;
    let mut coeffs = r.coeffs;
    for (i, c) in &eq.coeffs {
        *coeffs.entry(*i).or_insert_with(Rat::zero) -= c * &f;
    }
    coeffs.retain(|_, c| !c.is_zero());
    Row { coeffs, k: r.k - &eq.k * f, rel: r.rel }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::expr::State;
    use crate::lang::parse_bexpr;

    fn chk(s: &str) -> Feasibility {
        check(&parse_bexpr(s).unwrap())
    }

    #[test]
    fn linear_cases() {
        assert_eq!(chk("x < 1 && x > 2"), Feasibility::Unsat);
        assert_eq!(chk("x <= 1 && x >= 1"), Feasibility::Sat);
        assert_eq!(chk("x < 1 && x >= 1"), Feasibility::Unsat);
        assert_eq!(chk("x == y + 1 && y == 2 && x < 3"), Feasibility::Unsat);
        assert_eq!(chk("(x < 0 || x > 5) && x >= 1 && x <= 4"), Feasibility::Unsat);
        assert_eq!(chk("(x < 0 || x > 5) && x >= 1"), Feasibility::Sat);
        assert_eq!(chk("!(x == 1) && x >= 1 && x <= 1"), Feasibility::Unsat);
    }

    #[test]
    fn nonlinear_relaxation() {
        assert_eq!(chk("x^2 < 0"), Feasibility::Unsat);
        assert_eq!(chk("x*y > 1 && x*y < 0"), Feasibility::Unsat);
        assert_eq!(chk("x*y > 1"), Feasibility::Unknown);
    }

    proptest! {
        // Any witness found by brute force over a small grid contradicts an
        // Unsat answer; an exhaustive grid miss is not evidence of Unsat.
        #[test]
        fn unsat_has_no_grid_witness(a in -3i64..=3, b in -3i64..=3, c in -3i64..=3, ops in prop::collection::vec(0u8..5, 3)) {
            let op = |i: usize| match ops[i] { 0 => "<", 1 => "<=", 2 => "==", 3 => ">=", _ => ">" };
            let text = format!("x {} {a} && x + y {} {b} && y {} {c}", op(0), op(1), op(2));
            let f = parse_bexpr(&text).unwrap();
            let verdict = check(&f);
            let mut witness = false;
            for x2 in -16..=16 {
                for y2 in -16..=16 {
                    let s = State::from_pairs([("x", crate::expr::frac(x2, 2)), ("y", crate::expr::frac(y2, 2))]);
                    if f.eval(&s).unwrap() {
                        witness = true;
                    }
                }
            }
            if witness {
                prop_assert_eq!(verdict, Feasibility::Sat);
            }
            if verdict == Feasibility::Unsat {
                prop_assert!(!witness);
            }
        }
    }
}
