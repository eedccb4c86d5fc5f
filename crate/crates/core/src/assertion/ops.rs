use std::collections::{BTreeMap, BTreeSet};

use crate::expr::{rat, BExpr, BoundVar, Expr};

use super::{Assertion, Binder1, Binder2, CommSpec, ExprBinder, KernelError, PathAssertion};

/// Child-index path into an assertion, following [`Assertion::children`].
pub type Position = Vec<usize>;

/// Distributes the simultaneous substitution `sigma` on the starting state
/// one level into `a`. Constructors without structure (`init`, holes,
/// recursion, unresolved sync) keep an explicit `Subst` node.
pub fn push_subst(a: &Assertion, sigma: &[(String, Expr)]) -> Assertion {
    let map: BTreeMap<String, Expr> = sigma.iter().cloned().collect();
    if map.is_empty() {
        return a.clone();
    }
    let risky: BTreeSet<BoundVar> = map.values().flat_map(|e| e.bounds()).collect();
    let sub = |p: &Assertion| Assertion::Subst(Box::new(p.clone()), sigma.to_vec());
    let sub_e = |e: &Expr| e.subst_vars(&map);
    match a {
        Assertion::True | Assertion::False => a.clone(),
        Assertion::Init | Assertion::Hole(_) | Assertion::Rec { .. } | Assertion::Sync { .. } => sub(a),
        Assertion::And(x, y) => Assertion::and(sub(x), sub(y)),
        Assertion::Or(x, y) => Assertion::or(sub(x), sub(y)),
        Assertion::Guard(b, p) => Assertion::guard(b.subst_vars(&map), sub(p)),
        Assertion::Subst(p, tau) => {
            let mut rho: Vec<(String, Expr)> = tau.iter().map(|(x, e)| (x.clone(), sub_e(e))).collect();
            for (y, e) in sigma {
                if !tau.iter().any(|(x, _)| x == y) {
                    rho.push((y.clone(), e.clone()));
                }
            }
            Assertion::Subst(p.clone(), rho)
        }
        Assertion::WaitIn { path, ch, body } => {
            let body = avoid2(body, &risky);
            Assertion::WaitIn { path: path.subst(&map), ch: ch.clone(), body: body.map_body(|b| sub(b)) }
        }
        Assertion::WaitOutv { path, ch, value, body } => {
            let body = avoid1(body, &risky);
            Assertion::WaitOutv {
                path: path.subst(&map),
                ch: ch.clone(),
                value: sub_e(value),
                body: body.map_body(|b| sub(b)),
            }
        }
        Assertion::Wait { path, time, body } => {
            let body = avoid1(body, &risky);
            Assertion::Wait { path: path.subst(&map), time: sub_e(time), body: body.map_body(|b| sub(b)) }
        }
        Assertion::Interrupt { path, time, tail, comms } => {
            let tail = avoid1(tail, &risky);
            Assertion::Interrupt {
                path: path.subst(&map),
                time: sub_e(time),
                tail: tail.map_body(|b| sub(b)),
                comms: comms.iter().map(|c| subst_comm(c, sigma, &map, &risky)).collect(),
            }
        }
        Assertion::InterruptInf { path, comms } => Assertion::InterruptInf {
            path: path.subst(&map),
            comms: comms.iter().map(|c| subst_comm(c, sigma, &map, &risky)).collect(),
        },
        Assertion::Io { ch, value, body } => {
            Assertion::Io { ch: ch.clone(), value: sub_e(value), body: Box::new(sub(body)) }
        }
    }
}

fn subst_comm(
    c: &CommSpec,
    sigma: &[(String, Expr)],
    map: &BTreeMap<String, Expr>,
    risky: &BTreeSet<BoundVar>,
) -> CommSpec {
    let sub = |p: &Assertion| Assertion::Subst(Box::new(p.clone()), sigma.to_vec());
    match c {
        CommSpec::In { ch, body } => CommSpec::In { ch: ch.clone(), body: avoid2(body, risky).map_body(|b| sub(b)) },
        CommSpec::Out { ch, value, body } => {
            let value = if risky.contains(&value.d) { ExprBinder::new(|d| value.apply(d)) } else { value.clone() };
            CommSpec::Out {
                ch: ch.clone(),
                value: ExprBinder { d: value.d, expr: value.expr.subst_vars(map) },
                body: avoid1(body, risky).map_body(|b| sub(b)),
            }
        }
    }
}

fn avoid1(b: &Binder1, risky: &BTreeSet<BoundVar>) -> Binder1 {
    if risky.contains(&b.d) {
        Binder1::new(|d| b.apply(d))
    } else {
        b.clone()
    }
}

fn avoid2(b: &Binder2, risky: &BTreeSet<BoundVar>) -> Binder2 {
    if risky.contains(&b.d) || risky.contains(&b.v) {
        Binder2::new(|d, v| b.apply(d, v))
    } else {
        b.clone()
    }
}

/// `delay(d, A)` on a waiting assertion: the remainder of `A` once `d` time
/// units of its waiting phase have elapsed.
pub fn delay(d: &Expr, a: &Assertion) -> Result<Assertion, KernelError> {
    delay_with(d, a, true)
}

/// [`delay`] with an option to leave the path unshifted (mutation testing).
#[doc(hidden)]
pub fn delay_with(d: &Expr, a: &Assertion, shift_path: bool) -> Result<Assertion, KernelError> {
    let shift = |p: &PathAssertion| if shift_path { p.delayed(d) } else { p.clone() };
    let later1 = |b: &Binder1| Binder1::new(|dp| b.apply(&(dp.clone() + d.clone())));
    Ok(match a {
        Assertion::Wait { path, time, body } => {
            Assertion::Wait { path: shift(path), time: (time.clone() - d.clone()).simplify(), body: later1(body) }
        }
        Assertion::WaitIn { path, ch, body } => Assertion::WaitIn {
            path: shift(path),
            ch: ch.clone(),
            body: Binder2::new(|dp, v| body.apply(&(dp.clone() + d.clone()), v)),
        },
        Assertion::WaitOutv { path, ch, value, body } => {
            Assertion::WaitOutv { path: shift(path), ch: ch.clone(), value: value.clone(), body: later1(body) }
        }
        Assertion::Interrupt { path, time, tail, comms } => Assertion::Interrupt {
            path: shift(path),
            time: (time.clone() - d.clone()).simplify(),
            tail: later1(tail),
            comms: delay_cm(d, comms),
        },
        Assertion::InterruptInf { path, comms } => {
            Assertion::InterruptInf { path: shift(path), comms: delay_cm(d, comms) }
        }
        other => return Err(KernelError::NotWaiting(other.to_string())),
    })
}

/// `delay_cm(cm, d)`: every communication body (and output value) sees its
/// delay argument shifted by `d`.
pub fn delay_cm(d: &Expr, cm: &[CommSpec]) -> Vec<CommSpec> {
    cm.iter()
        .map(|c| match c {
            CommSpec::In { ch, body } => {
                CommSpec::In { ch: ch.clone(), body: Binder2::new(|dp, v| body.apply(&(dp.clone() + d.clone()), v)) }
            }
            CommSpec::Out { ch, value, body } => CommSpec::Out {
                ch: ch.clone(),
                value: ExprBinder::new(|dp| value.apply(&(dp.clone() + d.clone()))),
                body: Binder1::new(|dp| body.apply(&(dp.clone() + d.clone()))),
            },
        })
        .collect()
}

/// Canonical form: unit laws for `∧`, `∨`, guards and substitutions,
/// substitutions pushed to the leaves, and each waiting assertion expressed
/// with its most specific constructor.
pub fn normalize(a: &Assertion) -> Assertion {
    match a {
        Assertion::True | Assertion::False | Assertion::Init | Assertion::Hole(_) => a.clone(),
        Assertion::And(x, y) => match (normalize(x), normalize(y)) {
            (Assertion::False, _) | (_, Assertion::False) => Assertion::False,
            (Assertion::True, z) | (z, Assertion::True) => z,
            (x, y) => Assertion::and(x, y),
        },
        Assertion::Or(x, y) => match (normalize(x), normalize(y)) {
            (Assertion::True, _) | (_, Assertion::True) => Assertion::True,
            (Assertion::False, z) | (z, Assertion::False) => z,
            (x, y) => Assertion::or(x, y),
        },
        Assertion::Guard(b, p) => match b.simplify() {
            BExpr::False => Assertion::False,
            BExpr::True => normalize(p),
            b => match normalize(p) {
                Assertion::False => Assertion::False,
                p => Assertion::guard(b, p),
            },
        },
        Assertion::Subst(p, sigma) => {
            let sigma: Vec<(String, Expr)> =
                sigma.iter().map(|(x, e)| (x.clone(), e.simplify())).filter(|(x, e)| *e != Expr::var(x)).collect();
            if sigma.is_empty() {
                return normalize(p);
            }
            match push_subst(p, &sigma) {
                Assertion::Subst(inner, rho) => {
                    let inner = normalize(&inner);
                    match inner {
                        Assertion::True | Assertion::False => inner,
                        Assertion::Init | Assertion::Hole(_) | Assertion::Rec { .. } | Assertion::Sync { .. } => {
                            let rho: Vec<(String, Expr)> = rho
                                .into_iter()
                                .map(|(x, e)| (x, e.simplify()))
                                .filter(|(x, e)| *e != Expr::var(x))
                                .collect();
                            if rho.is_empty() {
                                inner
                            } else {
                                Assertion::Subst(Box::new(inner), rho)
                            }
                        }
                        other => normalize(&Assertion::Subst(Box::new(other), rho)),
                    }
                }
                pushed => normalize(&pushed),
            }
        }
        Assertion::Wait { path, time, body } => {
            let time = time.simplify();
            if let Some(c) = time.as_const() {
                if *c <= rat(0) {
                    return normalize(&body.apply(&Expr::zero()));
                }
            }
            let body = body.map_body(normalize);
            if *body.body == Assertion::False {
                return Assertion::False;
            }
            Assertion::Wait { path: path.clone().canonical(), time, body }
        }
        Assertion::WaitIn { path, ch, body } => {
            let body = body.map_body(normalize);
            if *body.body == Assertion::False {
                return Assertion::False;
            }
            Assertion::WaitIn { path: path.clone().canonical(), ch: ch.clone(), body }
        }
        Assertion::WaitOutv { path, ch, value, body } => {
            let body = body.map_body(normalize);
            if *body.body == Assertion::False {
                return Assertion::False;
            }
            Assertion::WaitOutv { path: path.clone().canonical(), ch: ch.clone(), value: value.simplify(), body }
        }
        Assertion::Interrupt { path, time, tail, comms } => {
            if comms.is_empty() {
                return normalize(&Assertion::Wait { path: path.clone(), time: time.clone(), body: tail.clone() });
            }
            let tail = tail.map_body(normalize);
            let comms = normalize_comms(comms);
            if *tail.body == Assertion::False && comms_dead(&comms) {
                return Assertion::False;
            }
            Assertion::Interrupt { path: path.clone().canonical(), time: time.simplify(), tail, comms }
        }
        Assertion::InterruptInf { path, comms } => {
            let comms = normalize_comms(comms);
            if comms_dead(&comms) {
                return Assertion::False;
            }
            let path = path.clone().canonical();
            if let [single] = comms.as_slice() {
                match single {
                    CommSpec::In { ch, body } => {
                        return Assertion::WaitIn { path, ch: ch.clone(), body: body.clone() };
                    }
                    CommSpec::Out { ch, value, body } if !value.mentions_arg() => {
                        return Assertion::WaitOutv {
                            path,
                            ch: ch.clone(),
                            value: value.expr.clone(),
                            body: body.clone(),
                        };
                    }
                    CommSpec::Out { .. } => {}
                }
            }
            Assertion::InterruptInf { path, comms }
        }
        Assertion::Io { ch, value, body } => match normalize(body) {
            Assertion::False => Assertion::False,
            body => Assertion::Io { ch: ch.clone(), value: value.simplify(), body: Box::new(body) },
        },
        Assertion::Rec { var, base, step } => {
            Assertion::Rec { var: *var, base: Box::new(normalize(base)), step: Box::new(normalize(step)) }
        }
        Assertion::Sync { chs, left, right } => Assertion::sync(chs.clone(), normalize(left), normalize(right)),
    }
}

fn normalize_comms(comms: &[CommSpec]) -> Vec<CommSpec> {
    comms
        .iter()
        .map(|c| match c {
            CommSpec::In { ch, body } => CommSpec::In { ch: ch.clone(), body: body.map_body(normalize) },
            CommSpec::Out { ch, value, body } => CommSpec::Out {
                ch: ch.clone(),
                value: ExprBinder { d: value.d, expr: value.expr.simplify() },
                body: body.map_body(normalize),
            },
        })
        .collect()
}

fn comms_dead(comms: &[CommSpec]) -> bool {
    comms.iter().all(|c| match c {
        CommSpec::In { body, .. } => *body.body == Assertion::False,
        CommSpec::Out { body, .. } => *body.body == Assertion::False,
    })
}

/// Replaces the sub-assertion at `pos` by `f(sub)`. Sound as an entailment
/// step `A ⟹ A'` whenever `sub ⟹ f(sub)`, by monotonicity of every
/// constructor in its assertion arguments.
pub fn mono_rewrite(
    a: &Assertion,
    pos: &[usize],
    f: &mut dyn FnMut(&Assertion) -> Assertion,
) -> Result<Assertion, KernelError> {
    rewrite_at(a, pos, 0, f)
}

fn rewrite_at(
    a: &Assertion,
    pos: &[usize],
    depth: usize,
    f: &mut dyn FnMut(&Assertion) -> Assertion,
) -> Result<Assertion, KernelError> {
    let Some(&idx) = pos.get(depth) else { return Ok(f(a)) };
    if idx >= a.children().len() {
        return Err(KernelError::Position(pos.to_vec()));
    }
    let mut i = 0;
    let mut err = None;
    let out = a.map_children(&mut |c| {
        let r = if i == idx {
            match rewrite_at(c, pos, depth + 1, f) {
                Ok(x) => x,
                Err(e) => {
                    err = Some(e);
                    c.clone()
                }
            }
        } else {
            c.clone()
        };
        i += 1;
        r
    });
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::BExpr;

    fn wait_in_init(x: &str) -> Assertion {
        let x = x.to_string();
        Assertion::WaitIn {
            path: PathAssertion::id(),
            ch: "ch".into(),
            body: Binder2::new(move |_, v| Assertion::subst(Assertion::Init, &x, v.clone())),
        }
    }

    #[test]
    fn push_subst_into_wait_in() {
        let a = wait_in_init("y");
        let r = push_subst(&a, &[("x".into(), Expr::int(3))]);
        let Assertion::WaitIn { path, body, .. } = &r else { panic!() };
        assert_eq!(path.to_string(), "s = s0[x ↦ 3]");
        assert!(matches!(&*body.body, Assertion::Subst(_, s) if s[0].0 == "x"));
        let n = normalize(&r);
        assert_eq!(n.to_string(), "wait_in(s = s0[x ↦ 3], ch, {(d, v) => init[y := v, x := 3]})");
    }

    #[test]
    fn init_keeps_pending_substitution() {
        let a = Assertion::subst(Assertion::Init, "x", Expr::var("x") + Expr::int(1));
        assert_eq!(normalize(&a).to_string(), "init[x := 1+x]");
        let id = Assertion::subst(Assertion::Init, "x", Expr::var("x"));
        assert_eq!(normalize(&id), Assertion::Init);
    }

    #[test]
    fn nested_subst_composes() {
        let inner = Assertion::subst(Assertion::Init, "x", Expr::var("x") + Expr::var("y"));
        let a = Assertion::subst(inner, "y", Expr::int(2));
        assert_eq!(normalize(&a).to_string(), "init[x := 2+x, y := 2]");
    }

    #[test]
    fn special_case_constructors() {
        let body = Binder2::new(|_, _| Assertion::Init);
        let inf = Assertion::InterruptInf {
            path: PathAssertion::id(),
            comms: vec![CommSpec::In { ch: "ch".into(), body: body.clone() }],
        };
        assert_eq!(normalize(&inf), Assertion::WaitIn { path: PathAssertion::id(), ch: "ch".into(), body });
        let tail = Binder1::constant(Assertion::Init);
        let int =
            Assertion::Interrupt { path: PathAssertion::id(), time: Expr::int(2), tail: tail.clone(), comms: vec![] };
        assert_eq!(normalize(&int), Assertion::Wait { path: PathAssertion::id(), time: Expr::int(2), body: tail });
        let out = Assertion::InterruptInf {
            path: PathAssertion::id(),
            comms: vec![CommSpec::Out {
                ch: "c".into(),
                value: ExprBinder::constant(Expr::var("x")),
                body: Binder1::constant(Assertion::Init),
            }],
        };
        assert!(matches!(normalize(&out), Assertion::WaitOutv { .. }));
        let moving = Assertion::InterruptInf {
            path: PathAssertion::id(),
            comms: vec![CommSpec::Out {
                ch: "c".into(),
                value: ExprBinder::new(|d| Expr::var("x") + d.clone()),
                body: Binder1::constant(Assertion::Init),
            }],
        };
        assert!(matches!(normalize(&moving), Assertion::InterruptInf { .. }));
    }

    #[test]
    fn normalize_units() {
        let g = Assertion::or(Assertion::False, Assertion::guard(BExpr::True, Assertion::Init));
        assert_eq!(normalize(&g), Assertion::Init);
        let w = Assertion::Wait {
            path: PathAssertion::id(),
            time: Expr::int(0),
            body: Binder1::new(|d| Assertion::subst(Assertion::Init, "x", d.clone())),
        };
        assert_eq!(normalize(&w), Assertion::subst(Assertion::Init, "x", Expr::int(0)));
    }

    #[test]
    fn delay_zero_is_identity_up_to_normalization() {
        let w = Assertion::Interrupt {
            path: PathAssertion::solution(BTreeMap::from([("x".to_string(), Expr::var("x") + Expr::time())])),
            time: Expr::int(3),
            tail: Binder1::new(|d| Assertion::subst(Assertion::Init, "x", Expr::var("x") + d.clone())),
            comms: vec![CommSpec::Out {
                ch: "c".into(),
                value: ExprBinder::new(|d| Expr::var("x") + d.clone()),
                body: Binder1::new(|d| Assertion::subst(Assertion::Init, "x", Expr::var("x") + d.clone())),
            }],
        };
        let r = normalize(&delay(&Expr::int(0), &w).unwrap());
        assert_eq!(r.to_string(), normalize(&w).to_string());
        let r2 = delay(&Expr::int(2), &w).unwrap();
        assert_eq!(
            normalize(&r2).to_string(),
            "interrupt(s = s0[x ↦ 2+x+t], 1, {d => init[x := 2+x+d]}, [<c!, {d2 => 2+x+d2}, {d3 => init[x := 2+x+d3]}>])"
        );
        assert!(delay(&Expr::int(1), &Assertion::Init).is_err());
    }

    #[test]
    fn mono_rewrite_positions() {
        let a = Assertion::or(Assertion::Init, wait_in_init("x"));
        assert_eq!(mono_rewrite(&a, &[], &mut |p| p.clone()).unwrap(), a);
        let r = mono_rewrite(&a, &[1, 0], &mut |_| Assertion::True).unwrap();
        assert_eq!(r.to_string(), "init ∨ wait_in(id_inv, ch, {(d, v) => true})");
        assert!(mono_rewrite(&a, &[2], &mut |p| p.clone()).is_err());
    }
}
