//! Independent oracles shared by the integration tests and the acceptance run.
#![allow(dead_code)]

pub mod ast;
pub mod rewrite;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;

use hcsp::chan::{Dir, Rdy};
use hcsp::expr::{rat, rat_to_f64, BoundVar, Expr, State};
use hcsp::semantics::{CommKind, Event, Path, Trace};

/// Floating-point evaluation of `e` with program variables from `vars` and
/// path time `t`.
pub fn eval_f64(e: &Expr, vars: &BTreeMap<String, f64>, t: f64) -> f64 {
    match e {
        Expr::Const(c) => rat_to_f64(c),
        Expr::Var(x) => vars[x],
        Expr::Bound(b) if *b == BoundVar::TIME => t,
        Expr::Param(_) | Expr::Bound(_) => panic!("unexpected symbol in {e}"),
        Expr::Neg(a) => -eval_f64(a, vars, t),
        Expr::Add(a, b) => eval_f64(a, vars, t) + eval_f64(b, vars, t),
        Expr::Sub(a, b) => eval_f64(a, vars, t) - eval_f64(b, vars, t),
        Expr::Mul(a, b) => eval_f64(a, vars, t) * eval_f64(b, vars, t),
        Expr::Div(a, b) => eval_f64(a, vars, t) / eval_f64(b, vars, t),
        Expr::Pow(a, k) => eval_f64(a, vars, t).powi(*k as i32),
    }
}

/// Classic fourth-order Runge-Kutta integration of `eqs` from `s0` over
/// `[0, t]` in `steps` steps. Variables not defined by `eqs` stay constant.
pub fn rk4(eqs: &[(String, Expr)], s0: &BTreeMap<String, f64>, t: f64, steps: usize) -> BTreeMap<String, f64> {
    let h = t / steps as f64;
    let deriv = |s: &BTreeMap<String, f64>| -> Vec<f64> { eqs.iter().map(|(_, e)| eval_f64(e, s, 0.0)).collect() };
    let offset = |s: &BTreeMap<String, f64>, k: &[f64], c: f64| {
        let mut out = s.clone();
        for ((x, _), dk) in eqs.iter().zip(k) {
            *out.get_mut(x).expect("ODE variable in state") += c * dk;
        }
        out
    };
    let mut s = s0.clone();
    for _ in 0..steps {
        let k1 = deriv(&s);
        let k2 = deriv(&offset(&s, &k1, h / 2.0));
        let k3 = deriv(&offset(&s, &k2, h / 2.0));
        let k4 = deriv(&offset(&s, &k3, h));
        for (i, (x, _)) in eqs.iter().enumerate() {
            *s.get_mut(x).expect("ODE variable in state") += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    s
}

/// A random nilpotent system: `x_i' = sum_{j>i} a_ij x_j + b_i` over a
/// shuffled variable order, with `b_i` a constant or the outside variable `c`.
pub fn nilpotent_system<R: Rng>(rng: &mut R) -> Vec<(String, Expr)> {
    let mut names = vec!["x", "y", "z", "w"];
    names.truncate(rng.gen_range(1..=4));
    names.shuffle(rng);
    let n = names.len();
    (0..n)
        .map(|i| {
            let mut rhs = match rng.gen_range(0..3) {
                0 => Expr::int(rng.gen_range(-3..=3)),
                1 => Expr::var("c"),
                _ => Expr::zero(),
            };
            for j in i + 1..n {
                let a = rng.gen_range(-2..=2);
                if a != 0 {
                    rhs = rhs + Expr::int(a) * Expr::var(names[j]);
                }
            }
            (names[i].to_string(), rhs)
        })
        .collect()
}

/// Communication events and waiting blocks of one side of a trace pair.
/// Paths range over `var` only, so the two sides always merge.
pub fn alphabet(var: &str) -> Vec<Event> {
    let mut out = Vec::new();
    for ch in ["a", "b"] {
        for kind in [CommKind::Out, CommKind::In] {
            out.push(Event::Comm { ch: ch.into(), kind, value: rat(1) });
        }
    }
    out.push(Event::Comm { ch: "a".into(), kind: CommKind::Out, value: rat(2) });
    let rdys: [Rdy; 3] = [BTreeSet::new(), [("a".to_string(), Dir::Out)].into(), [("a".to_string(), Dir::In)].into()];
    let path = Path::new(State::from_pairs([(var, rat(0))]), BTreeMap::from([(var.to_string(), Expr::time())]));
    for d in [1, 2] {
        for rdy in &rdys {
            out.push(Event::Cont { d: rat(d), path: path.clone(), rdy: rdy.clone() });
        }
    }
    out
}

/// Every trace of at most `max_len` events over `alpha`, with or without a
/// trailing deadlock marker.
pub fn traces(alpha: &[Event], max_len: usize) -> Vec<Trace> {
    let mut layer: Vec<Trace> = vec![vec![]];
    let mut out = Vec::new();
    for len in 0..=max_len {
        for t in &layer {
            out.push(t.clone());
            if len < max_len {
                let mut d = t.clone();
                d.push(Event::Deadlock);
                out.push(d);
            }
        }
        if len < max_len {
            layer =
                layer.iter().flat_map(|t| alpha.iter().map(move |e| [t.clone(), vec![e.clone()]].concat())).collect();
        }
    }
    out
}

fn can_handshake(r1: &Rdy, r2: &Rdy, cs: &BTreeSet<String>) -> bool {
    r1.iter().any(|(ch, d)| {
        let dual = match d {
            Dir::In => Dir::Out,
            Dir::Out => Dir::In,
        };
        cs.contains(ch) && r2.contains(&(ch.clone(), dual))
    })
}

fn cons(e: Event, rest: Vec<Trace>) -> Vec<Trace> {
    rest.into_iter().map(|t| [vec![e.clone()], t].concat()).collect()
}

/// The rules with the first trace in the left position; `derive` applies
/// them to both orientations.
fn left_rules(l: &[Event], r: &[Event], cs: &BTreeSet<String>, swap: bool) -> Vec<Trace> {
    let recurse = |a: &[Event], b: &[Event]| if swap { derive(b, cs, a) } else { derive(a, cs, b) };
    let mut out = Vec::new();
    let Some(head) = l.first() else { return out };
    // NoSyncIO
    if let Event::Comm { ch, .. } = head {
        if !cs.contains(ch) {
            out.extend(cons(head.clone(), recurse(&l[1..], r)));
        }
    }
    if r.is_empty() {
        match head {
            // SyncEmpty1
            Event::Comm { ch, .. } if cs.contains(ch) => out.push(vec![Event::Deadlock]),
            // SyncEmpty2
            Event::Cont { .. } if !recurse(&l[1..], &[]).is_empty() => out.push(vec![Event::Deadlock]),
            _ => {}
        }
    }
    match (head, r.first()) {
        // SyncIO
        (
            Event::Comm { ch, kind: CommKind::Out, value },
            Some(Event::Comm { ch: ch2, kind: CommKind::In, value: v2 }),
        ) if ch == ch2 && value == v2 && cs.contains(ch) => {
            let e = Event::Comm { ch: ch.clone(), kind: CommKind::Sync, value: value.clone() };
            out.extend(cons(e, recurse(&l[1..], &r[1..])));
        }
        (Event::Cont { d: d1, path: p1, rdy: r1 }, Some(Event::Cont { d: d2, path: p2, rdy: r2 }))
            if !can_handshake(r1, r2, cs) && !can_handshake(r2, r1, cs) && d1 >= d2 =>
        {
            let start = p1.start().merge(p2.start()).expect("disjoint sides");
            let mut map = p1.map().clone();
            map.extend(p2.map().clone());
            let rdy: Rdy = r1.iter().chain(r2).filter(|(ch, _)| !cs.contains(ch)).cloned().collect();
            let e = Event::Cont { d: d2.clone(), path: Path::new(start, map), rdy };
            if d1 == d2 {
                // SyncWait1, emitted once: the mirrored instance is the same step.
                if !swap {
                    out.extend(cons(e, recurse(&l[1..], &r[1..])));
                }
            } else {
                // SyncWait2
                let rest = Event::Cont { d: d1 - d2, path: p1.shifted(d2), rdy: r1.clone() };
                out.extend(cons(e, recurse(&[vec![rest], l[1..].to_vec()].concat(), &r[1..])));
            }
        }
        _ => {}
    }
    out
}

/// All traces derivable from `l ||cs r` by exhaustive search over the trace
/// synchronization rules, without memoization. A deadlock marker at the head
/// of either side is the only result.
pub fn derive(l: &[Event], cs: &BTreeSet<String>, r: &[Event]) -> Vec<Trace> {
    if matches!(l.first(), Some(Event::Deadlock)) || matches!(r.first(), Some(Event::Deadlock)) {
        return vec![vec![Event::Deadlock]];
    }
    if l.is_empty() && r.is_empty() {
        // SyncEmpty3
        return vec![vec![]];
    }
    let mut out = left_rules(l, r, cs, false);
    out.extend(left_rules(r, l, cs, true));
    out
}

pub fn brute_force(l: &[Event], cs: &BTreeSet<String>, r: &[Event]) -> BTreeSet<Trace> {
    derive(l, cs, r).into_iter().collect()
}
