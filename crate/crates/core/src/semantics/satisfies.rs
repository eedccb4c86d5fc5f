use std::cell::Cell;
use std::collections::BTreeMap;

use num_traits::Signed;
use thiserror::Error;

use crate::assertion::{rdy, Assertion, CommSpec, PathAssertion};
use crate::expr::{BExpr, CmpOp, Expr, ExprError, Rat, State, Valuation};

use super::{CommKind, Event, Path};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SatError {
    #[error("assertion contains an unresolved sync")]
    UnresolvedSync,
    #[error("assertion contains a free recursion hole")]
    FreeHole,
    #[error("recursion unfolding budget exhausted without a verdict")]
    Inconclusive,
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// Default number of recursion unfoldings allowed beyond the trace length.
pub const MAX_UNFOLD: usize = 8;

/// `(s0, s, tr) ⊨ P`.
pub fn satisfies(s0: &State, s: &State, tr: &[Event], p: &Assertion) -> Result<bool, SatError> {
    satisfies_with(s0, s, tr, p, MAX_UNFOLD)
}

/// [`satisfies`] with an explicit bound on recursion unfoldings beyond the
/// number of trace events.
pub fn satisfies_with(s0: &State, s: &State, tr: &[Event], p: &Assertion, max_unfold: usize) -> Result<bool, SatError> {
    if p.contains_sync() {
        return Err(SatError::UnresolvedSync);
    }
    let checker = Checker { s, exhausted: Cell::new(false) };
    let ok = checker.sat(p, s0, &BTreeMap::new(), tr, tr.len() + max_unfold)?;
    if !ok && checker.exhausted.get() {
        return Err(SatError::Inconclusive);
    }
    Ok(ok)
}

type Params = BTreeMap<String, Rat>;

struct Checker<'a> {
    s: &'a State,
    exhausted: Cell<bool>,
}

fn eval(e: &Expr, s0: &State, params: &Params) -> Result<Rat, ExprError> {
    let mut v = Valuation::new(s0);
    v.params = params.clone();
    e.eval(&v)
}

fn holds(b: &BExpr, s0: &State, params: &Params) -> Result<bool, ExprError> {
    let mut v = Valuation::new(s0);
    v.params = params.clone();
    b.eval(&v)
}

/// Binds parameters defined by top-level conjuncts `p == e`.
/// Binds every parameter defined by a conjunct `p == e` of `b`. Such a guard
/// is the local definition of `p`, so an outer binding (from an earlier loop
/// iteration) is shadowed.
fn bind_params(b: &BExpr, s0: &State, params: &mut Params) {
    let defining = |c: &BExpr| -> Vec<String> {
        let mut out = Vec::new();
        if let BExpr::Cmp(CmpOp::Eq, l, r) = c {
            for side in [l, r] {
                if let Expr::Param(p) = side {
                    out.push(p.clone());
                }
            }
        }
        out
    };
    for c in b.conjuncts() {
        for p in defining(c) {
            params.remove(&p);
        }
    }
    loop {
        let mut progress = false;
        for c in b.conjuncts() {
            if let BExpr::Cmp(CmpOp::Eq, l, r) = c {
                for (lhs, rhs) in [(l, r), (r, l)] {
                    if let Expr::Param(p) = lhs {
                        if !params.contains_key(p) {
                            if let Ok(v) = eval(rhs, s0, params) {
                                params.insert(p.clone(), v);
                                progress = true;
                            }
                        }
                    }
                }
            }
        }
        if !progress {
            return;
        }
    }
}

fn konst(r: &Rat) -> Expr {
    Expr::constant(r.clone())
}

/// `∀t ∈ [0, d]. (s0, t, p(t)) ⊨ I`, decided by polynomial identity of
/// every component.
fn path_ok(i: &PathAssertion, p: &Path, s0: &State, params: &Params) -> bool {
    let mut vars: Vec<String> = p.vars();
    vars.extend(s0.vars().cloned());
    vars.extend(i.map.keys().cloned());
    vars.sort();
    vars.dedup();
    let mut val = Valuation::new(s0);
    val.params = params.clone();
    for x in vars {
        let Some(actual) = p.component(&x) else { return false };
        let expected = i.at(&x).partial_eval(&val);
        if !expected.vars().is_empty() || !expected.params().is_empty() {
            return false;
        }
        if !actual.equiv(&expected) {
            return false;
        }
    }
    true
}

impl Checker<'_> {
    fn sat(&self, a: &Assertion, s0: &State, params: &Params, tr: &[Event], budget: usize) -> Result<bool, SatError> {
        match a {
            Assertion::True => Ok(true),
            Assertion::False => Ok(false),
            Assertion::Init => Ok(tr.is_empty() && s0 == self.s),
            Assertion::And(x, y) => Ok(self.sat(x, s0, params, tr, budget)? && self.sat(y, s0, params, tr, budget)?),
            Assertion::Or(x, y) => Ok(self.sat(x, s0, params, tr, budget)? || self.sat(y, s0, params, tr, budget)?),
            Assertion::Guard(b, p) => {
                let mut params = params.clone();
                bind_params(b, s0, &mut params);
                if !holds(b, s0, &params)? {
                    return Ok(false);
                }
                self.sat(p, s0, &params, tr, budget)
            }
            Assertion::Subst(p, sigma) => {
                let mut s1 = s0.clone();
                for (x, e) in sigma {
                    s1.set(x, eval(e, s0, params)?);
                }
                self.sat(p, &s1, params, tr, budget)
            }
            Assertion::Io { ch, value, body } => match tr.first() {
                Some(Event::Comm { ch: c, kind: CommKind::Sync, value: v }) if c == ch => {
                    if *v != eval(value, s0, params)? {
                        return Ok(false);
                    }
                    self.sat(body, s0, params, &tr[1..], budget)
                }
                _ => Ok(false),
            },
            Assertion::Wait { path, time, body } => {
                let e = eval(time, s0, params)?;
                if !e.is_positive() {
                    return self.sat(&body.apply(&Expr::zero()), s0, params, tr, budget);
                }
                match tr.first() {
                    Some(Event::Cont { d, path: p, rdy }) if *d == e && rdy.is_empty() => {
                        if !path_ok(path, p, s0, params) {
                            return Ok(false);
                        }
                        self.sat(&body.apply(&konst(&e)), s0, params, &tr[1..], budget)
                    }
                    _ => Ok(false),
                }
            }
            Assertion::WaitIn { path, ch, body } => {
                let cm = [CommSpec::In { ch: ch.clone(), body: body.clone() }];
                self.comms(path, &cm, None, s0, params, tr, budget)
            }
            Assertion::WaitOutv { path, ch, value, body } => {
                let cm = [CommSpec::Out {
                    ch: ch.clone(),
                    value: crate::assertion::ExprBinder::constant(value.clone()),
                    body: body.clone(),
                }];
                self.comms(path, &cm, None, s0, params, tr, budget)
            }
            Assertion::Interrupt { path, time, tail, comms } => {
                let e = eval(time, s0, params)?;
                if e.is_positive() {
                    if let Some(Event::Cont { d, path: p, rdy: r }) = tr.first() {
                        if *d == e && *r == rdy(comms) && path_ok(path, p, s0, params) {
                            if self.sat(&tail.apply(&konst(&e)), s0, params, &tr[1..], budget)? {
                                return Ok(true);
                            }
                        }
                    }
                } else if self.sat(&tail.apply(&Expr::zero()), s0, params, tr, budget)? {
                    return Ok(true);
                }
                self.comms(path, comms, Some(&e), s0, params, tr, budget)
            }
            Assertion::InterruptInf { path, comms } => self.comms(path, comms, None, s0, params, tr, budget),
            Assertion::Rec { var, base, step } => {
                if self.sat(base, s0, params, tr, budget)? {
                    return Ok(true);
                }
                if budget == 0 {
                    self.exhausted.set(true);
                    return Ok(false);
                }
                let unfolded = step.fill_hole(*var, a);
                self.sat(&unfolded, s0, params, tr, budget - 1)
            }
            Assertion::Hole(_) => Err(SatError::FreeHole),
            Assertion::Sync { .. } => Err(SatError::UnresolvedSync),
        }
    }

    /// The communication rules of interrupt assertions; `limit` bounds the
    /// waiting time (absent for the infinite case).
    #[allow(clippy::too_many_arguments)]
    fn comms(
        &self,
        path: &PathAssertion,
        cm: &[CommSpec],
        limit: Option<&Rat>,
        s0: &State,
        params: &Params,
        tr: &[Event],
        budget: usize,
    ) -> Result<bool, SatError> {
        let (delay, head, rest) = match tr {
            [Event::Comm { .. }, ..] => (Rat::from_integer(0.into()), &tr[0], &tr[1..]),
            [Event::Cont { d, path: p, rdy: r }, head @ Event::Comm { .. }, ..] => {
                if *r != rdy(cm) || !path_ok(path, p, s0, params) {
                    return Ok(false);
                }
                if let Some(e) = limit {
                    if d > e {
                        return Ok(false);
                    }
                }
                (d.clone(), head, &tr[2..])
            }
            _ => return Ok(false),
        };
        let Event::Comm { ch, kind, value } = head else { return Ok(false) };
        let d = konst(&delay);
        for c in cm {
            let hit = match (c, kind) {
                (CommSpec::In { ch: c2, body }, CommKind::In) if c2 == ch => {
                    self.sat(&body.apply(&d, &konst(value)), s0, params, rest, budget)?
                }
                (CommSpec::Out { ch: c2, value: f, body }, CommKind::Out) if c2 == ch => {
                    *value == eval(&f.apply(&d), s0, params)? && self.sat(&body.apply(&d), s0, params, rest, budget)?
                }
                _ => false,
            };
            if hit {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assertion::{Binder1, Binder2, RecVar};
    use crate::chan::{Dir, Rdy};
    use crate::expr::rat;

    fn st(x: i64) -> State {
        State::from_pairs([("x", rat(x))])
    }

    #[test]
    fn init_true_false() {
        let s = st(1);
        assert!(satisfies(&s, &s, &[], &Assertion::Init).unwrap());
        assert!(!satisfies(&s, &st(2), &[], &Assertion::Init).unwrap());
        assert!(!satisfies(&s, &s, &[], &Assertion::False).unwrap());
        assert!(satisfies(&s, &s, &[Event::Deadlock], &Assertion::True).unwrap());
        assert!(!satisfies(&s, &s, &[Event::Deadlock], &Assertion::Init).unwrap());
    }

    #[test]
    fn wait_in_rules() {
        let a = Assertion::WaitIn {
            path: PathAssertion::id(),
            ch: "ch".into(),
            body: Binder2::new(|_, v| Assertion::subst(Assertion::Init, "x", v.clone())),
        };
        let s0 = st(0);
        let now = [Event::Comm { ch: "ch".into(), kind: CommKind::In, value: rat(4) }];
        assert!(satisfies(&s0, &st(4), &now, &a).unwrap());
        assert!(!satisfies(&s0, &st(5), &now, &a).unwrap());
        let later = [
            Event::Cont { d: rat(2), path: Path::constant(&s0), rdy: Rdy::from([("ch".to_string(), Dir::In)]) },
            now[0].clone(),
        ];
        assert!(satisfies(&s0, &st(4), &later, &a).unwrap());
        let wrong_rdy = [Event::Cont { d: rat(2), path: Path::constant(&s0), rdy: Rdy::new() }, now[0].clone()];
        assert!(!satisfies(&s0, &st(4), &wrong_rdy, &a).unwrap());
    }

    #[test]
    fn guard_binds_parameter() {
        let w = Assertion::Wait {
            path: PathAssertion::id(),
            time: Expr::param("t1"),
            body: Binder1::constant(Assertion::Init),
        };
        let a = Assertion::guard(BExpr::eq(Expr::param("t1"), Expr::int(5) - Expr::var("x")), w);
        let s0 = st(2);
        let tr = [Event::Cont { d: rat(3), path: Path::constant(&s0), rdy: Rdy::new() }];
        assert!(satisfies(&s0, &s0, &tr, &a).unwrap());
        let tr = [Event::Cont { d: rat(2), path: Path::constant(&s0), rdy: Rdy::new() }];
        assert!(!satisfies(&s0, &s0, &tr, &a).unwrap());
    }

    #[test]
    fn recursion_and_errors() {
        let r = RecVar::fresh();
        let step = Assertion::WaitOutv {
            path: PathAssertion::id(),
            ch: "c".into(),
            value: Expr::var("x"),
            body: Binder1::constant(Assertion::Hole(r)),
        };
        let rec = Assertion::Rec { var: r, base: Box::new(Assertion::Init), step: Box::new(step) };
        let s = st(1);
        let ev = Event::Comm { ch: "c".into(), kind: CommKind::Out, value: rat(1) };
        assert!(satisfies(&s, &s, &[ev.clone(), ev.clone(), ev.clone()], &rec).unwrap());
        let bad = Event::Comm { ch: "c".into(), kind: CommKind::Out, value: rat(2) };
        assert!(!satisfies(&s, &s, &[ev, bad], &rec).unwrap());
        let sync = Assertion::sync(Default::default(), Assertion::Init, Assertion::Init);
        assert_eq!(satisfies(&s, &s, &[], &sync), Err(SatError::UnresolvedSync));
        let spin = Assertion::Rec {
            var: r,
            base: Box::new(Assertion::False),
            step: Box::new(Assertion::subst(Assertion::Hole(r), "x", Expr::var("x"))),
        };
        assert_eq!(satisfies(&s, &s, &[], &spin), Err(SatError::Inconclusive));
    }
}
