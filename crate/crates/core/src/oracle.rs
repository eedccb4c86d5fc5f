//! Randomized cross-checking of assertions against the interpreter: random
//! processes, states and schedules, and a schedule driver that resolves
//! choices on demand.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::assertion::Assertion;
use crate::chan::Dir;
use crate::expr::{frac, rat, BExpr, Expr, Rat, State};
use crate::lang::{CommBranch, Ode, Process};
use crate::semantics::{
    exec_parallel, exec_partial, satisfies_with, sync_traces, Choice, Event, ExecError, Need, SatError, Schedule,
    Trace, MAX_UNFOLD,
};

#[derive(Debug, Clone)]
pub struct DriveOptions {
    /// Total number of `repeat: true` choices allowed in one run.
    pub max_unroll: usize,
    /// Probability of following a partner hint when one is available.
    pub hint_prob: f64,
    /// Upper bound on interpreter replays per run.
    pub max_replays: usize,
}

impl Default for DriveOptions {
    fn default() -> Self {
        DriveOptions { max_unroll: 3, hint_prob: 0.9, max_replays: 400 }
    }
}

/// Communication events of a partner trace, by channel. The `k`-th
/// communication on a channel is hinted to match the partner's `k`-th one,
/// preferably at the earliest time the partner was ready for it.
#[derive(Debug, Clone, Default)]
pub struct Hints {
    by_chan: BTreeMap<String, Vec<Hint>>,
}

#[derive(Debug, Clone)]
struct Hint {
    ready: Rat,
    at: Rat,
    value: Rat,
}

impl Hints {
    pub fn from_trace(tr: &[Event]) -> Hints {
        let mut h = Hints::default();
        let mut now = rat(0);
        for (i, e) in tr.iter().enumerate() {
            match e {
                Event::Cont { d, .. } => now += d,
                Event::Comm { ch, value, .. } => {
                    let waited: Rat = tr[..i]
                        .iter()
                        .rev()
                        .map_while(|e| match e {
                            Event::Cont { d, rdy, .. } if rdy.iter().any(|(c, _)| c == ch) => Some(d.clone()),
                            _ => None,
                        })
                        .sum();
                    let hint = Hint { ready: &now - waited, at: now.clone(), value: value.clone() };
                    h.by_chan.entry(ch.clone()).or_default().push(hint);
                }
                Event::Deadlock => {}
            }
        }
        h
    }

    fn nth(&self, ch: &str, k: usize) -> Option<&Hint> {
        self.by_chan.get(ch).and_then(|v| v.get(k))
    }
}

/// A completed run with the schedule that produced it.
#[derive(Debug, Clone)]
pub struct Run {
    pub schedule: Vec<Choice>,
    pub state: State,
    pub trace: Trace,
}

const DELAYS: [(i64, i64); 5] = [(0, 1), (1, 2), (1, 1), (3, 2), (2, 1)];
const VALUES: [(i64, i64); 7] = [(-2, 1), (-1, 1), (0, 1), (1, 2), (1, 1), (2, 1), (3, 1)];

fn pick_rat<R: Rng>(rng: &mut R, table: &[(i64, i64)]) -> Rat {
    let (n, d) = table[rng.gen_range(0..table.len())];
    frac(n, d)
}

fn elapsed(tr: &[Event]) -> Rat {
    tr.iter()
        .map(|e| match e {
            Event::Cont { d, .. } => d.clone(),
            _ => rat(0),
        })
        .sum()
}

fn comms_on(tr: &[Event], ch: &str) -> usize {
    tr.iter().filter(|e| matches!(e, Event::Comm { ch: c, .. } if c == ch)).count()
}

/// Runs `c` from `s0`, extending the schedule whenever the interpreter asks
/// for a choice. Choices rejected by the interpreter (invalid delays, a
/// boundary that is never reached) are replaced by the next candidate.
pub fn drive<R: Rng>(
    c: &Process,
    s0: &State,
    rng: &mut R,
    opts: &DriveOptions,
    hints: &Hints,
) -> Result<Run, ExecError> {
    let mut choices: Vec<Choice> = Vec::new();
    let mut alts: Vec<Vec<Choice>> = Vec::new();
    let mut last_err = ExecError::Exhausted("replay budget");
    for _ in 0..opts.max_replays {
        let mut sched = Schedule::new(choices.clone());
        let (r, tr) = exec_partial(c, s0, &mut sched);
        match r {
            Ok(state) => return Ok(Run { schedule: choices, state, trace: tr }),
            Err(ExecError::Exhausted(_)) => {
                let need = sched.need().cloned().unwrap_or_default();
                let mut cands = candidates(&need, &tr, &choices, rng, opts, hints);
                choices.push(cands.remove(0));
                alts.push(cands);
            }
            Err(e @ (ExecError::InvalidChoice(_) | ExecError::Divergence(_))) => {
                last_err = e.clone();
                loop {
                    let Some(mut rest) = alts.pop() else { return Err(e) };
                    choices.pop();
                    if !rest.is_empty() {
                        choices.push(rest.remove(0));
                        alts.push(rest);
                        break;
                    }
                }
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err)
}

fn candidates<R: Rng>(
    need: &Need,
    tr: &[Event],
    prefix: &[Choice],
    rng: &mut R,
    opts: &DriveOptions,
    hints: &Hints,
) -> Vec<Choice> {
    let now = elapsed(tr);
    let after = |t: &Rat| if *t > now { t - &now } else { rat(0) };
    let hinted = |ch: &str| -> Vec<(Rat, Rat)> {
        match hints.nth(ch, comms_on(tr, ch)) {
            Some(h) => {
                let mut v = vec![(after(&h.ready), h.value.clone())];
                if h.at != h.ready {
                    v.push((after(&h.at), h.value.clone()));
                }
                v
            }
            None => vec![],
        }
    };
    let follow = rng.gen_bool(opts.hint_prob);
    let order = |hint: Vec<Choice>, random: Vec<Choice>| {
        if follow {
            hint.into_iter().chain(random).collect::<Vec<_>>()
        } else {
            random.into_iter().chain(hint).collect()
        }
    };
    match need.what {
        "branch" => {
            let b = rng.gen_range(0..2u8);
            vec![Choice::Branch(b), Choice::Branch(1 - b)]
        }
        "repeat" => {
            let unrolled = prefix.iter().filter(|c| matches!(c, Choice::Repeat(true))).count();
            if unrolled >= opts.max_unroll {
                vec![Choice::Repeat(false)]
            } else {
                let b = rng.gen_bool(0.5);
                vec![Choice::Repeat(b), Choice::Repeat(!b)]
            }
        }
        "input" | "output" => {
            let ch = need.offers.first().map(|o| o.0.clone()).unwrap_or_default();
            let make = |delay: Rat, value: Rat| match need.what {
                "input" => Choice::Input { delay, value },
                _ => Choice::Output { delay },
            };
            let hint: Vec<Choice> = hinted(&ch).into_iter().map(|(d, v)| make(d, v)).collect();
            let random =
                vec![make(pick_rat(rng, &DELAYS), pick_rat(rng, &VALUES)), make(rat(0), pick_rat(rng, &VALUES))];
            order(hint, random)
        }
        _ => {
            let n = need.offers.len().max(1);
            let mut hint: Vec<(Rat, Choice)> = need
                .offers
                .iter()
                .enumerate()
                .flat_map(|(index, (ch, _))| {
                    hinted(ch)
                        .into_iter()
                        .map(move |(delay, value)| (delay.clone(), Choice::Interrupt { index, delay, value }))
                })
                .collect();
            hint.sort_by(|a, b| a.0.cmp(&b.0));
            let mut random = vec![
                Choice::Interrupt {
                    index: rng.gen_range(0..n),
                    delay: pick_rat(rng, &DELAYS),
                    value: pick_rat(rng, &VALUES),
                },
                Choice::Boundary,
            ];
            random.shuffle(rng);
            let mut out = order(hint.into_iter().map(|(_, c)| c).collect(), random);
            out.push(Choice::Interrupt { index: rng.gen_range(0..n), delay: rat(0), value: pick_rat(rng, &VALUES) });
            out.push(Choice::Interrupt { index: 0, delay: rat(0), value: rat(0) });
            out
        }
    }
}

/// A synchronized run of a two-component parallel composition.
#[derive(Debug, Clone)]
pub struct ParallelRun {
    pub left: Vec<Choice>,
    pub right: Vec<Choice>,
    pub pick: usize,
    pub state: State,
    pub trace: Trace,
}

impl ParallelRun {
    pub fn schedule(&self) -> Vec<Choice> {
        vec![Choice::Parallel { left: self.left.clone(), right: self.right.clone(), pick: self.pick }]
    }
}

/// Drives both sides of `c1 ||chs c2`, feeding each side the other's
/// communications as hints, until the traces synchronize without deadlock.
/// Returns `Ok(None)` if no such pair was found within `rounds`.
pub fn drive_parallel<R: Rng>(
    c: &Process,
    s0: &State,
    rng: &mut R,
    opts: &DriveOptions,
    rounds: usize,
) -> Result<Option<ParallelRun>, ExecError> {
    let Process::Parallel(p1, chs, p2) = c else {
        return Err(ExecError::Unsupported("drive_parallel expects a parallel composition".into()));
    };
    if p1.is_parallel() || p2.is_parallel() {
        return Err(ExecError::Unsupported("nested parallel composition in the oracle driver".into()));
    }
    let v1 = p1.free_vars();
    let v2 = p2.free_vars();
    let s1 = s0.restrict(|x| v1.contains(x));
    let s2 = s0.restrict(|x| v2.contains(x));
    let mut from_right = Hints::default();
    for _ in 0..rounds {
        let l = drive(p1, &s1, rng, opts, &from_right)?;
        let r = drive(p2, &s2, rng, opts, &Hints::from_trace(&l.trace))?;
        let good: Vec<usize> = sync_traces(&l.trace, chs, &r.trace)
            .iter()
            .enumerate()
            .filter(|(_, t)| !t.contains(&Event::Deadlock))
            .map(|(i, _)| i)
            .collect();
        if let Some(&pick) = good.choose(rng) {
            let (state, trace) = exec_parallel(
                c,
                s0,
                &mut Schedule::new(l.schedule.clone()),
                &mut Schedule::new(r.schedule.clone()),
                pick,
            )?;
            return Ok(Some(ParallelRun { left: l.schedule, right: r.schedule, pick, state, trace }));
        }
        from_right = Hints::from_trace(&r.trace);
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    /// The run violates the assertion.
    Fail(String),
    /// No verdict: the run could not be produced or the check was inconclusive.
    Skipped(String),
}

/// Checks one concrete triple, reporting failures with the full trace.
pub fn check_triple(s0: &State, s: &State, tr: &[Event], spec: &Assertion) -> Verdict {
    match satisfies_with(s0, s, tr, spec, MAX_UNFOLD) {
        Ok(true) => Verdict::Pass,
        Ok(false) => Verdict::Fail(format!(
            "s0 = {s0}\ns = {s}\ntrace = {}\nassertion = {}",
            crate::semantics::format_trace(tr),
            spec.pretty()
        )),
        Err(SatError::Inconclusive) => Verdict::Skipped("recursion budget exhausted".into()),
        Err(e) => Verdict::Skipped(e.to_string()),
    }
}

/// One random run of a sequential process, checked against `spec`.
pub fn check_sequential<R: Rng>(
    c: &Process,
    spec: &Assertion,
    s0: &State,
    rng: &mut R,
    opts: &DriveOptions,
) -> Verdict {
    match drive(c, s0, rng, opts, &Hints::default()) {
        Ok(run) => check_triple(s0, &run.state, &run.trace, spec),
        Err(e) => Verdict::Skipped(e.to_string()),
    }
}

/// One random synchronized run of `c1 ||chs c2`, checked against `spec`.
pub fn check_parallel<R: Rng>(
    c: &Process,
    spec: &Assertion,
    s0: &State,
    rng: &mut R,
    opts: &DriveOptions,
    rounds: usize,
) -> Verdict {
    match drive_parallel(c, s0, rng, opts, rounds) {
        Ok(Some(run)) => check_triple(s0, &run.state, &run.trace, spec),
        Ok(None) => Verdict::Skipped("no synchronized run found".into()),
        Err(e) => Verdict::Skipped(e.to_string()),
    }
}

/// Random generator of sequential processes over a fixed vocabulary.
#[derive(Debug, Clone)]
pub struct ProcessGen {
    pub vars: Vec<String>,
    pub chans: Vec<String>,
    /// Allow ODEs and interrupts.
    pub continuous: bool,
}

impl Default for ProcessGen {
    fn default() -> Self {
        ProcessGen {
            vars: vec!["x".into(), "y".into(), "z".into()],
            chans: vec!["a".into(), "b".into()],
            continuous: true,
        }
    }
}

fn small<R: Rng>(rng: &mut R) -> Expr {
    Expr::int(rng.gen_range(-2..=3))
}

impl ProcessGen {
    fn var<R: Rng>(&self, rng: &mut R) -> String {
        self.vars.choose(rng).expect("vars nonempty").clone()
    }

    fn chan<R: Rng>(&self, rng: &mut R) -> String {
        self.chans.choose(rng).expect("chans nonempty").clone()
    }

    pub fn expr<R: Rng>(&self, rng: &mut R) -> Expr {
        match rng.gen_range(0..5) {
            0 => small(rng),
            1 => Expr::var(&self.var(rng)),
            2 => Expr::var(&self.var(rng)) + small(rng),
            3 => small(rng) * Expr::var(&self.var(rng)) - Expr::var(&self.var(rng)),
            _ => Expr::var(&self.var(rng)) * Expr::var(&self.var(rng)),
        }
    }

    pub fn bexpr<R: Rng>(&self, rng: &mut R) -> BExpr {
        let cmp = |rng: &mut R| {
            let l = Expr::var(&self.var(rng));
            let r = self.expr(rng);
            match rng.gen_range(0..4) {
                0 => BExpr::lt(l, r),
                1 => BExpr::le(l, r),
                2 => BExpr::gt(l, r),
                _ => BExpr::ge(l, r),
            }
        };
        match rng.gen_range(0..6) {
            0 => BExpr::and(cmp(rng), cmp(rng)),
            1 => BExpr::or(cmp(rng), cmp(rng)),
            2 => BExpr::not(cmp(rng)),
            _ => cmp(rng),
        }
    }

    pub fn state<R: Rng>(&self, rng: &mut R) -> State {
        let mut s = State::new();
        for x in &self.vars {
            s.set(x, frac(rng.gen_range(-6..=6), rng.gen_range(1..=2)));
        }
        s
    }

    /// ODE whose boundary has a closed form; interruptible ones may also have
    /// an unbounded domain.
    pub fn ode<R: Rng>(&self, rng: &mut R, interruptible: bool) -> Ode {
        let x = self.var(rng);
        let y = loop {
            let y = self.var(rng);
            if y != x || self.vars.len() == 1 {
                break y;
            }
        };
        let c = small(rng);
        let k = [1, 2, -1][rng.gen_range(0..3)];
        let mut eqs = vec![(x.clone(), Expr::int(k))];
        if y != x && rng.gen_bool(0.5) {
            eqs.push((y.clone(), Expr::var(&x)));
        }
        let bounded = &x;
        let exit = if k > 0 { BExpr::lt(Expr::var(bounded), c) } else { BExpr::gt(Expr::var(bounded), c) };
        let domain = if interruptible {
            match rng.gen_range(0..4) {
                0 => BExpr::True,
                1 if k > 0 => BExpr::gt(Expr::var(bounded), small(rng)),
                _ => exit,
            }
        } else {
            exit
        };
        Ode { eqs, domain }
    }

    fn atom<R: Rng>(&self, rng: &mut R) -> Process {
        let top = if self.continuous { 7 } else { 5 };
        match rng.gen_range(0..top) {
            0 => Process::Skip,
            1 => Process::Assign(self.var(rng), self.expr(rng)),
            2 => Process::Input(self.chan(rng), self.var(rng)),
            3 => Process::Output(self.chan(rng), self.expr(rng)),
            4 => Process::Wait(if rng.gen_bool(0.5) {
                Expr::int(rng.gen_range(0..3))
            } else {
                Expr::var(&self.var(rng))
            }),
            _ => Process::Ode(self.ode(rng, false)),
        }
    }

    /// Random process of nesting depth at most `depth`.
    pub fn process<R: Rng>(&self, rng: &mut R, depth: usize) -> Process {
        if depth == 0 {
            return self.atom(rng);
        }
        let d = depth - 1;
        let top = if self.continuous { 7 } else { 6 };
        match rng.gen_range(0..top) {
            0 => self.atom(rng),
            1 | 2 => Process::seq(self.process(rng, d), self.process(rng, d)),
            3 => Process::cond(self.bexpr(rng), self.process(rng, d), self.process(rng, d)),
            4 => Process::choice(self.process(rng, d), self.process(rng, d)),
            5 => Process::repeat(self.process(rng, d)),
            _ => {
                let ode = self.ode(rng, true);
                let n = rng.gen_range(1..=2);
                let branches = (0..n)
                    .map(|_| {
                        let cont = self.process(rng, d.saturating_sub(1));
                        if rng.gen_bool(0.5) {
                            CommBranch::Input { ch: self.chan(rng), var: self.var(rng), cont }
                        } else {
                            CommBranch::Output { ch: self.chan(rng), value: self.expr(rng), cont }
                        }
                    })
                    .collect();
                let tail = if rng.gen_bool(0.5) { Process::Skip } else { self.process(rng, d.saturating_sub(1)) };
                Process::Interrupt { ode, tail: Box::new(tail), branches }
            }
        }
    }
}

/// Channels offered by the process in some direction.
pub fn offered(c: &Process) -> BTreeSet<(String, Dir)> {
    let mut out = BTreeSet::new();
    c.walk(&mut |p| match p {
        Process::Input(ch, _) => {
            out.insert((ch.clone(), Dir::In));
        }
        Process::Output(ch, _) => {
            out.insert((ch.clone(), Dir::Out));
        }
        Process::Interrupt { branches, .. } => {
            for b in branches {
                let dir = if matches!(b, CommBranch::Input { .. }) { Dir::In } else { Dir::Out };
                out.insert((b.channel().to_string(), dir));
            }
        }
        _ => {}
    });
    out
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::lang::parse;
    use crate::specgen::generate;

    #[test]
    fn driver_completes_loops_and_interrupts() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = parse("(x := x+1)*; <x_dot = 1 & true |> skip> |> [] (a!x -> skip)").unwrap();
        let s0 = State::from_pairs([("x", rat(0))]);
        let run = drive(&c, &s0, &mut rng, &DriveOptions::default(), &Hints::default()).unwrap();
        let unrolled = run.schedule.iter().filter(|c| matches!(c, Choice::Repeat(true))).count();
        assert!(unrolled <= 3);
        assert!(matches!(run.trace.last(), Some(Event::Comm { ch, .. }) if ch == "a"));
    }

    #[test]
    fn hints_align_handshakes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = parse("wait 2; a!x ||[a] a?y").unwrap();
        let s0 = State::from_pairs([("x", rat(7)), ("y", rat(0))]);
        let run = drive_parallel(&c, &s0, &mut rng, &DriveOptions::default(), 4).unwrap().unwrap();
        assert_eq!(run.state.get("y").unwrap(), &rat(7));
    }

    #[test]
    fn generated_specs_hold_on_small_corpus() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = ProcessGen::default();
        let opts = DriveOptions::default();
        let mut passed = 0;
        for _ in 0..150 {
            let c = g.process(&mut rng, 3);
            let spec = generate(&c).unwrap().assertion;
            let s0 = g.state(&mut rng);
            match check_sequential(&c, &spec, &s0, &mut rng, &opts) {
                Verdict::Pass => passed += 1,
                Verdict::Fail(msg) => panic!("{}\n{msg}", c.pretty()),
                Verdict::Skipped(_) => {}
            }
        }
        assert!(passed >= 120, "only {passed} runs checked");
    }
}
