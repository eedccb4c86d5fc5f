//! Satisfaction preservation of the assertion rewrites on concrete triples.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hcsp::assertion::{delay, delay_with, normalize, push_subst, Assertion};
use hcsp::expr::{frac, rat, BExpr, CmpOp, Expr, Rat, State};
use hcsp::lang::{CommBranch, Process};
use hcsp::oracle::{drive, DriveOptions, Hints, ProcessGen};
use hcsp::semantics::{satisfies, Event, Trace};

#[derive(Debug, Default)]
pub struct Counts {
    /// Comparisons with a verdict on both sides.
    pub checks: usize,
    /// Checks where the original assertion held.
    pub held: usize,
    pub by_rule: BTreeMap<&'static str, usize>,
    pub disagreements: Vec<String>,
    /// Comparisons dropped because a side had no verdict.
    pub skipped: usize,
}

struct Triple {
    s0: State,
    s: State,
    tr: Trace,
}

fn head<R: Rng>(pg: &ProcessGen, rng: &mut R) -> Process {
    let ch = ["a", "b"][rng.gen_range(0..2)].to_string();
    match rng.gen_range(0..5) {
        0 => Process::Wait(Expr::int(rng.gen_range(1..=3))),
        1 => Process::Input(ch, "y".into()),
        2 => Process::Output(ch, pg.expr(rng)),
        3 => Process::Ode(pg.ode(rng, false)),
        _ => {
            let branch = if rng.gen_bool(0.5) {
                CommBranch::Input { ch, var: "z".into(), cont: Process::Skip }
            } else {
                CommBranch::Output { ch, value: pg.expr(rng), cont: pg.process(rng, 0) }
            };
            let tail = if rng.gen_bool(0.5) { Process::Skip } else { pg.process(rng, 1) };
            Process::Interrupt { ode: pg.ode(rng, true), tail: Box::new(tail), branches: vec![branch] }
        }
    }
}

/// `↑(p == e ∧ ...) ∧ P` with every conjunct defining a parameter, turned into
/// `P` with the definitions substituted.
fn inline_definitions(a: &Assertion) -> Assertion {
    let Assertion::Guard(b, p) = a else { return a.clone() };
    let mut sigma = BTreeMap::new();
    for c in b.conjuncts() {
        match c {
            BExpr::Cmp(CmpOp::Eq, Expr::Param(x), e) if e.params().is_empty() => {
                sigma.insert(x.clone(), e.clone());
            }
            _ => return a.clone(),
        }
    }
    inline_definitions(&p.subst_params(&sigma))
}

/// `Some(limit)` for a waiting assertion whose waiting time, if bounded,
/// evaluates in `s0`.
fn waiting_time(a: &Assertion, s0: &State) -> Option<Option<Rat>> {
    match a {
        Assertion::Wait { time, .. } | Assertion::Interrupt { time, .. } => time.eval(s0).ok().map(Some),
        Assertion::WaitIn { .. } | Assertion::WaitOutv { .. } | Assertion::InterruptInf { .. } => Some(None),
        _ => None,
    }
}

fn perturb<R: Rng>(t: &Triple, rng: &mut R) -> Triple {
    let mut out = Triple { s0: t.s0.clone(), s: t.s.clone(), tr: t.tr.clone() };
    match rng.gen_range(0..3) {
        0 if !out.tr.is_empty() => {
            out.tr.pop();
        }
        1 => {
            let xs: Vec<String> = out.s.vars().cloned().collect();
            if let Some(x) = xs.get(rng.gen_range(0..xs.len().max(1))) {
                let v = out.s.lookup(x).cloned().unwrap_or_default();
                out.s.set(x, v + rat(1));
            }
        }
        _ => {
            let xs: Vec<String> = out.s0.vars().cloned().collect();
            if let Some(x) = xs.get(rng.gen_range(0..xs.len().max(1))) {
                let v = out.s0.lookup(x).cloned().unwrap_or_default();
                out.s0.set(x, v - frac(1, 2));
            }
        }
    }
    out
}

fn compare(
    c: &mut Counts,
    rule: &'static str,
    (s0, s, tr): (&State, &State, &[Event]),
    old: &Assertion,
    alt: (&State, &State, &[Event]),
    new: &Assertion,
) {
    match (satisfies(s0, s, tr, old), satisfies(alt.0, alt.1, alt.2, new)) {
        (Ok(a), Ok(b)) => {
            c.checks += 1;
            c.held += a as usize;
            *c.by_rule.entry(rule).or_default() += 1;
            if a != b {
                c.disagreements.push(format!(
                    "{rule}: {a} vs {b}\n  old = {}\n  new = {}\n  s0 = {s0}, s = {s}\n  tr = {}",
                    old.pretty(),
                    new.pretty(),
                    hcsp::semantics::format_trace(tr)
                ));
            }
        }
        _ => c.skipped += 1,
    }
}

/// Checks `normalize`, `push_subst`, `delay(0, ·)` and the splitting law
/// of `delay` until `n` comparisons have a verdict. With `shift_path` off
/// the splitting law uses a delay that leaves paths unshifted.
pub fn campaign(seed: u64, n: usize, shift_path: bool) -> Counts {
    let pg = ProcessGen::default();
    let opts = DriveOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = Counts::default();
    while c.checks < n {
        let p = if rng.gen_bool(0.6) {
            Process::seq(head(&pg, &mut rng), pg.process(&mut rng, 2))
        } else {
            pg.process(&mut rng, 3)
        };
        let Ok(spec) = hcsp::specgen::generate(&p) else { continue };
        let a = spec.assertion;
        let s0 = pg.state(&mut rng);
        let Ok(run) = drive(&p, &s0, &mut rng, &opts, &Hints::default()) else { continue };
        let good = Triple { s0, s: run.state, tr: run.trace };
        let bad = perturb(&good, &mut rng);
        for t in [&good, &bad] {
            let tri = (&t.s0, &t.s, &t.tr[..]);
            compare(&mut c, "normalize", tri, &a, tri, &normalize(&a));
            let sigma: Vec<(String, Expr)> = (0..rng.gen_range(1..=2))
                .map(|i| (["x", "y", "z"][(i + rng.gen_range(0..3)) % 3].to_string(), pg.expr(&mut rng)))
                .collect::<BTreeMap<_, _>>()
                .into_iter()
                .collect();
            let wrapped = Assertion::Subst(Box::new(a.clone()), sigma.clone());
            compare(&mut c, "push_subst", tri, &wrapped, tri, &push_subst(&a, &sigma));
            if let Assertion::Subst(q, tau) = &a {
                compare(&mut c, "push_subst", tri, &a, tri, &push_subst(q, tau));
            }
            let w = inline_definitions(&a);
            let Some(limit) = waiting_time(&w, &t.s0) else { continue };
            compare(&mut c, "delay0", tri, &w, tri, &delay(&Expr::zero(), &w).expect("waiting"));
            let Some(Event::Cont { d: dur, path, rdy }) = t.tr.first() else { continue };
            let d = dur * frac(rng.gen_range(1..=3), 4);
            if limit.as_ref().is_some_and(|l| d >= *l) {
                continue;
            }
            let mut split = vec![Event::Cont { d: dur - &d, path: path.shifted(&d), rdy: rdy.clone() }];
            split.extend_from_slice(&t.tr[1..]);
            let delayed = delay_with(&Expr::constant(d), &w, shift_path).expect("waiting");
            compare(&mut c, "delay", tri, &w, (&t.s0, &t.s, &split), &delayed);
        }
    }
    c
}
