use num_traits::Signed;
use thiserror::Error;

use crate::chan::{Dir, Rdy};
use crate::expr::{format_rat, ExprError, Rat, State};
use crate::lang::{CommBranch, Ode, Process};
use crate::ode::{self, Boundary, OdeError, OdeSolution};

use super::{sync_traces, Choice, CommKind, Event, Path, Schedule, Trace};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("schedule exhausted (needed {0})")]
    Exhausted(&'static str),
    #[error("schedule mismatch: needed {expected}, found {found:?}")]
    Mismatch { expected: &'static str, found: Choice },
    #[error("invalid schedule choice: {0}")]
    InvalidChoice(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error("divergence: {0}")]
    Divergence(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("parallel composition produced no synchronized trace")]
    Deadlock,
    #[error("synchronized trace index {pick} out of range ({count} traces)")]
    Pick { pick: usize, count: usize },
}

fn expect(sched: &mut Schedule, what: &'static str) -> Result<Choice, ExecError> {
    expect_on(sched, what, &[])
}

fn expect_on(sched: &mut Schedule, what: &'static str, offers: &[(String, Dir)]) -> Result<Choice, ExecError> {
    sched.next_for(what, offers).ok_or(ExecError::Exhausted(what))
}

/// Runs a sequential process under `sched`.
pub fn exec(c: &Process, s: &State, sched: &mut Schedule) -> Result<(State, Trace), ExecError> {
    let mut tr = Vec::new();
    let s = step(c, s.clone(), sched, &mut tr)?;
    Ok((s, tr))
}

/// [`exec`] that also returns the trace produced before an error.
pub fn exec_partial(c: &Process, s: &State, sched: &mut Schedule) -> (Result<State, ExecError>, Trace) {
    let mut tr = Vec::new();
    let r = step(c, s.clone(), sched, &mut tr);
    (r, tr)
}

/// Runs any process; parallel compositions consume one `parallel` choice.
pub fn run(c: &Process, s: &State, sched: &mut Schedule) -> Result<(State, Trace), ExecError> {
    if c.is_parallel() {
        match expect(sched, "parallel")? {
            Choice::Parallel { left, right, pick } => {
                exec_parallel(c, s, &mut Schedule::new(left), &mut Schedule::new(right), pick)
            }
            found => Err(ExecError::Mismatch { expected: "parallel", found }),
        }
    } else {
        exec(c, s, sched)
    }
}

/// Rule ParB: runs both components on their parts of `s` and returns the
/// `pick`-th synchronized trace.
pub fn exec_parallel(
    c: &Process,
    s: &State,
    left: &mut Schedule,
    right: &mut Schedule,
    pick: usize,
) -> Result<(State, Trace), ExecError> {
    let Process::Parallel(p1, chs, p2) = c else {
        return exec(c, s, left);
    };
    let v1 = p1.free_vars();
    let v2 = p2.free_vars();
    if let Some(x) = v1.intersection(&v2).next() {
        return Err(ExecError::Expr(ExprError::Overlap(x.clone())));
    }
    let s1 = s.restrict(|x| v1.contains(x));
    let s2 = s.restrict(|x| v2.contains(x));
    let (f1, tr1) = run(p1, &s1, left)?;
    let (f2, tr2) = run(p2, &s2, right)?;
    let traces: Vec<Trace> = sync_traces(&tr1, chs, &tr2).into_iter().collect();
    if traces.is_empty() {
        return Err(ExecError::Deadlock);
    }
    let tr = traces.get(pick).cloned().ok_or(ExecError::Pick { pick, count: traces.len() })?;
    let mut out = f1.merge(&f2)?;
    // Variables of `s` used by neither side are carried through unchanged.
    for (x, v) in s.iter() {
        if !out.contains(x) {
            out.set(x, v.clone());
        }
    }
    Ok((out, tr))
}

struct Flow {
    sol: OdeSolution,
    boundary: Boundary,
}

fn flow(ode: &Ode) -> Result<Flow, ExecError> {
    let sol = ode::solve(&ode.eqs)?;
    let mut n = 0;
    let boundary = ode::boundary(&sol, &ode.domain, &mut || {
        n += 1;
        format!("exec#t{n}")
    });
    Ok(Flow { sol, boundary })
}

impl Flow {
    fn path(&self, s: &State) -> Path {
        let map = self.sol.solution.iter().map(|(x, e)| (x.clone(), e.partial_eval(s))).collect();
        Path::new(s.clone(), map)
    }

    /// Least `d > 0` with the domain failing at `p(d)` (rule ContB2), given
    /// that it holds in `s`. `None` when the evolution never leaves.
    fn exit_time(&self, ode: &Ode, s: &State) -> Result<Option<Rat>, ExecError> {
        match &self.boundary {
            Boundary::Infinite | Boundary::ZeroOrInfinite { .. } => Ok(None),
            Boundary::Explicit { time } => {
                let tau = time.eval(s)?;
                let end = self.path(s).at(&tau)?;
                if !tau.is_positive() || ode.domain.eval(&end)? {
                    return Err(ExecError::Divergence(format!(
                        "domain `{}` holds up to and at its boundary time {}; no least exit time exists",
                        ode.domain,
                        format_rat(&tau)
                    )));
                }
                Ok(Some(tau))
            }
            Boundary::Implicit { .. } => {
                Err(ExecError::Unsupported(format!("boundary of domain `{}` has no explicit closed form", ode.domain)))
            }
        }
    }
}

fn branch_rdy(branches: &[CommBranch]) -> Rdy {
    branch_rdy_list(branches).into_iter().collect()
}

fn branch_rdy_list(branches: &[CommBranch]) -> Vec<(String, Dir)> {
    branches
        .iter()
        .map(|b| match b {
            CommBranch::Input { ch, .. } => (ch.clone(), Dir::In),
            CommBranch::Output { ch, .. } => (ch.clone(), Dir::Out),
        })
        .collect()
}

fn wait_block(tr: &mut Trace, d: &Rat, s: &State, rdy: Rdy) {
    tr.push(Event::Cont { d: d.clone(), path: Path::constant(s), rdy });
}

fn step(c: &Process, s: State, sched: &mut Schedule, tr: &mut Trace) -> Result<State, ExecError> {
    match c {
        Process::Skip => Ok(s),
        Process::Assign(x, e) => {
            let v = e.eval(&s)?;
            Ok(s.with(x, v))
        }
        Process::Output(ch, e) => match expect_on(sched, "output", &[(ch.clone(), Dir::Out)])? {
            Choice::Output { delay } => {
                if delay.is_negative() {
                    return Err(ExecError::InvalidChoice(format!("negative delay {}", format_rat(&delay))));
                }
                if delay.is_positive() {
                    wait_block(tr, &delay, &s, Rdy::from([(ch.clone(), Dir::Out)]));
                }
                tr.push(Event::Comm { ch: ch.clone(), kind: CommKind::Out, value: e.eval(&s)? });
                Ok(s)
            }
            found => Err(ExecError::Mismatch { expected: "output", found }),
        },
        Process::Input(ch, x) => match expect_on(sched, "input", &[(ch.clone(), Dir::In)])? {
            Choice::Input { delay, value } => {
                if delay.is_negative() {
                    return Err(ExecError::InvalidChoice(format!("negative delay {}", format_rat(&delay))));
                }
                if delay.is_positive() {
                    wait_block(tr, &delay, &s, Rdy::from([(ch.clone(), Dir::In)]));
                }
                tr.push(Event::Comm { ch: ch.clone(), kind: CommKind::In, value: value.clone() });
                Ok(s.with(x, value))
            }
            found => Err(ExecError::Mismatch { expected: "input", found }),
        },
        Process::IChoice(a, b) => match expect(sched, "branch")? {
            Choice::Branch(0) => step(a, s, sched, tr),
            Choice::Branch(1) => step(b, s, sched, tr),
            found => Err(ExecError::Mismatch { expected: "branch", found }),
        },
        Process::Seq(a, b) => {
            let s = step(a, s, sched, tr)?;
            step(b, s, sched, tr)
        }
        Process::Repeat(body) => {
            let mut s = s;
            loop {
                match expect(sched, "repeat")? {
                    Choice::Repeat(true) => s = step(body, s, sched, tr)?,
                    Choice::Repeat(false) => return Ok(s),
                    found => return Err(ExecError::Mismatch { expected: "repeat", found }),
                }
            }
        }
        Process::Cond(b, c1, c2) => {
            if b.eval(&s)? {
                step(c1, s, sched, tr)
            } else {
                step(c2, s, sched, tr)
            }
        }
        Process::Wait(e) => {
            let d = e.eval(&s)?;
            if d.is_positive() {
                wait_block(tr, &d, &s, Rdy::new());
            }
            Ok(s)
        }
        Process::Ode(ode) => {
            if !ode.domain.eval(&s)? {
                return Ok(s);
            }
            let f = flow(ode)?;
            match f.exit_time(ode, &s)? {
                Some(d) => {
                    let path = f.path(&s);
                    let end = path.at(&d)?;
                    tr.push(Event::Cont { d, path, rdy: Rdy::new() });
                    Ok(end)
                }
                None => Err(ExecError::Divergence(format!("evolution within `{}` never terminates", ode.domain))),
            }
        }
        Process::Interrupt { ode, tail, branches } => interrupt(ode, tail, branches, s, sched, tr),
        Process::Parallel(..) => Err(ExecError::Unsupported("parallel composition inside a sequential context".into())),
    }
}

fn interrupt(
    ode: &Ode,
    tail: &Process,
    branches: &[CommBranch],
    s: State,
    sched: &mut Schedule,
    tr: &mut Trace,
) -> Result<State, ExecError> {
    let offers: Vec<_> = branch_rdy_list(branches);
    let choice = expect_on(sched, "interrupt or boundary", &offers)?;
    let inside = ode.domain.eval(&s)?;
    match choice {
        Choice::Boundary => {
            if !inside {
                // IntB5, with the domain read in the starting state.
                return step(tail, s, sched, tr);
            }
            let f = flow(ode)?;
            match f.exit_time(ode, &s)? {
                Some(d) => {
                    let path = f.path(&s);
                    let end = path.at(&d)?;
                    tr.push(Event::Cont { d, path, rdy: branch_rdy(branches) });
                    step(tail, end, sched, tr)
                }
                None => Err(ExecError::Divergence(format!("boundary selected but `{}` is never left", ode.domain))),
            }
        }
        Choice::Interrupt { index, delay, value } => {
            let br = branches
                .get(index)
                .ok_or_else(|| ExecError::InvalidChoice(format!("interrupt branch {index} of {}", branches.len())))?;
            if delay.is_negative() {
                return Err(ExecError::InvalidChoice(format!("negative delay {}", format_rat(&delay))));
            }
            let mut now = s;
            if delay.is_positive() {
                if !inside {
                    return Err(ExecError::InvalidChoice(format!(
                        "delay {} requested but domain `{}` fails initially",
                        format_rat(&delay),
                        ode.domain
                    )));
                }
                let f = flow(ode)?;
                let limit = match &f.boundary {
                    Boundary::Explicit { time } => Some(time.eval(&now)?),
                    Boundary::Implicit { .. } => {
                        return Err(ExecError::Unsupported(format!(
                            "boundary of domain `{}` has no explicit closed form",
                            ode.domain
                        )))
                    }
                    _ => None,
                };
                if let Some(limit) = limit {
                    if delay > limit {
                        return Err(ExecError::InvalidChoice(format!(
                            "delay {} exceeds boundary time {}",
                            format_rat(&delay),
                            format_rat(&limit)
                        )));
                    }
                }
                let path = f.path(&now);
                let end = path.at(&delay)?;
                tr.push(Event::Cont { d: delay, path, rdy: branch_rdy(branches) });
                now = end;
            }
            match br {
                CommBranch::Output { ch, value: e, cont } => {
                    tr.push(Event::Comm { ch: ch.clone(), kind: CommKind::Out, value: e.eval(&now)? });
                    step(cont, now, sched, tr)
                }
                CommBranch::Input { ch, var, cont } => {
                    tr.push(Event::Comm { ch: ch.clone(), kind: CommKind::In, value: value.clone() });
                    step(cont, now.with(var, value), sched, tr)
                }
            }
        }
        found => Err(ExecError::Mismatch { expected: "interrupt or boundary", found }),
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::expr::{frac, rat, Expr};
    use crate::lang::parse;

    fn sched(c: Vec<Choice>) -> Schedule {
        Schedule::new(c)
    }

    #[test]
    fn skip_and_assign() {
        let s = State::from_pairs([("x", rat(0))]);
        assert_eq!(exec(&Process::Skip, &s, &mut sched(vec![])).unwrap(), (s.clone(), vec![]));
        let (out, tr) = exec(&parse("x := x+1").unwrap(), &s, &mut sched(vec![])).unwrap();
        assert_eq!(out.get("x").unwrap(), &rat(1));
        assert!(tr.is_empty());
    }

    #[test]
    fn ode_runs_to_boundary() {
        let s = State::from_pairs([("x", rat(0))]);
        let (out, tr) = exec(&parse("<x_dot=1 & x<5>").unwrap(), &s, &mut sched(vec![])).unwrap();
        assert_eq!(out.get("x").unwrap(), &rat(5));
        let expected = Path::new(s.clone(), BTreeMap::from([("x".to_string(), Expr::time())]));
        assert_eq!(tr, vec![Event::Cont { d: rat(5), path: expected, rdy: Rdy::new() }]);
        let outside = State::from_pairs([("x", rat(7))]);
        assert_eq!(exec(&parse("<x_dot=1 & x<5>").unwrap(), &outside, &mut sched(vec![])).unwrap().1, vec![]);
        assert!(matches!(
            exec(&parse("<x_dot=1 & x<=5>").unwrap(), &s, &mut sched(vec![])),
            Err(ExecError::Divergence(_))
        ));
        assert!(matches!(
            exec(&parse("<x_dot=1 & true>").unwrap(), &s, &mut sched(vec![])),
            Err(ExecError::Divergence(_))
        ));
    }

    #[test]
    fn communication_with_waiting() {
        let s = State::from_pairs([("x", rat(0))]);
        let (out, tr) = exec(
            &parse("ch?x; ch!x+1").unwrap(),
            &s,
            &mut sched(vec![Choice::Input { delay: rat(2), value: rat(3) }, Choice::Output { delay: rat(0) }]),
        )
        .unwrap();
        assert_eq!(out.get("x").unwrap(), &rat(3));
        assert_eq!(tr.len(), 3);
        assert_eq!(tr[2], Event::Comm { ch: "ch".into(), kind: CommKind::Out, value: rat(4) });
        assert!(matches!(exec(&parse("ch?x").unwrap(), &s, &mut sched(vec![])), Err(ExecError::Exhausted(_))));
    }

    #[test]
    fn interrupt_rules() {
        let p = parse("<x_dot=1 & x<5 |> y := 1> |> [] (c!x -> skip, d?y -> skip)").unwrap();
        let s = State::from_pairs([("x", rat(0)), ("y", rat(0))]);
        let (out, tr) =
            exec(&p, &s, &mut sched(vec![Choice::Interrupt { index: 0, delay: frac(1, 2), value: rat(0) }])).unwrap();
        assert_eq!(out.get("x").unwrap(), &frac(1, 2));
        assert_eq!(tr[1], Event::Comm { ch: "c".into(), kind: CommKind::Out, value: frac(1, 2) });
        let (out, tr) = exec(&p, &s, &mut sched(vec![Choice::Boundary])).unwrap();
        assert_eq!(out.get("y").unwrap(), &rat(1));
        assert_eq!(tr.len(), 1);
        assert!(exec(&p, &s, &mut sched(vec![Choice::Interrupt { index: 1, delay: rat(6), value: rat(0) }])).is_err());
        let late = State::from_pairs([("x", rat(9)), ("y", rat(0))]);
        let (out, tr) = exec(&p, &late, &mut sched(vec![Choice::Boundary])).unwrap();
        assert_eq!(out.get("y").unwrap(), &rat(1));
        assert!(tr.is_empty());
    }

    #[test]
    fn parallel_handshake() {
        let p = parse("ch!1 ||[ch] ch?x").unwrap();
        let s = State::from_pairs([("x", rat(0))]);
        let (out, tr) = exec_parallel(
            &p,
            &s,
            &mut sched(vec![Choice::Output { delay: rat(0) }]),
            &mut sched(vec![Choice::Input { delay: rat(0), value: rat(1) }]),
            0,
        )
        .unwrap();
        assert_eq!(out.get("x").unwrap(), &rat(1));
        assert_eq!(tr, vec![Event::Comm { ch: "ch".into(), kind: CommKind::Sync, value: rat(1) }]);
        let skip = parse("skip ||[] skip").unwrap();
        let (_, tr) = exec_parallel(&skip, &State::new(), &mut sched(vec![]), &mut sched(vec![]), 0).unwrap();
        assert!(tr.is_empty());
    }

    #[test]
    fn deterministic_under_same_schedule() {
        let p = parse("(x := x+1; ch!x)*").unwrap();
        let s = State::from_pairs([("x", rat(0))]);
        let mk = || sched(vec![Choice::Repeat(true), Choice::Output { delay: rat(1) }, Choice::Repeat(false)]);
        assert_eq!(exec(&p, &s, &mut mk()).unwrap(), exec(&p, &s, &mut mk()).unwrap());
    }
}
