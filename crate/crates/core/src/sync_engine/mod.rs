//! Synchronization of the assertions of two parallel components into one
//! assertion over the merged state, with the accumulated branch condition
//! `cond`, the loop condition `rec_cond` and the residual obligations.
//!
//! Rules are tried in a fixed order on normalized inputs: false, disjunction
//! (left first), guard, substitution, holes, recursion, `init`, and finally
//! the waiting rules, where every waiting assertion is read as an interrupt.

mod names;
mod prune;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use thiserror::Error;

use crate::assertion::{
    delay_with, normalize, rdy, Assertion, Binder1, Binder2, CommSpec, ExprBinder, KernelError, PathAssertion, RecVar,
};
use crate::chan::compat;
use crate::expr::{BExpr, BoundKind, BoundVar, Expr, Poly};
use crate::obligation::{Obligation, ObligationKind};
use crate::solver::Solver;

pub use names::{prefix_program, NamedAssertion, Prefixer};
pub use prune::{Decision, PruneStats, PrunedBranch, Pruner, Refuter};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SyncError {
    #[error("no synchronization rule for `{0}`")]
    Unsupported(String),
    #[error("rec rule premise {premise} fails: {detail}")]
    RecPremise { premise: u8, detail: String },
    #[error("loop continuation `{0}` outside a matching pair of loops")]
    Hole(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("{0}")]
    Prefix(String),
    #[error("`{expr}` mentions variables outside process `{side}`")]
    MixedPrefix { expr: String, side: String },
    #[error("synchronization exceeded {0} rule applications")]
    Budget(usize),
}

/// Seeded rule defects used to measure the sensitivity of the oracle.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mutation {
    /// The subst rule forgets the substitution it pulls out.
    SubstDrop,
    /// A handshake delivers 0 instead of the sent value.
    CommValueZero,
    /// `delay` leaves the path assertion unshifted.
    DelayNoShift,
    /// The first interrupt rule waits for the longer time.
    WaitMinSwap,
    /// Merging path assertions keeps only the left one.
    PathMergeDrop,
}

impl Mutation {
    pub const ALL: [Mutation; 5] = [
        Mutation::SubstDrop,
        Mutation::CommValueZero,
        Mutation::DelayNoShift,
        Mutation::WaitMinSwap,
        Mutation::PathMergeDrop,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mutation::SubstDrop => "subst-drop",
            Mutation::CommValueZero => "comm-value-zero",
            Mutation::DelayNoShift => "delay-no-shift",
            Mutation::WaitMinSwap => "wait-min-swap",
            Mutation::PathMergeDrop => "path-merge-drop",
        }
    }

    pub fn from_name(s: &str) -> Option<Mutation> {
        Mutation::ALL.into_iter().find(|m| m.name() == s)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SyncConfig {
    /// Refute guard conditions against `cond`; off, every guard is kept.
    pub prune: bool,
    pub solver: Option<Arc<Solver>>,
    /// Upper bound on rule applications; unbounded when absent.
    pub budget: Option<usize>,
    #[doc(hidden)]
    pub mutation: Option<Mutation>,
}

impl SyncConfig {
    pub fn pruning(solver: Option<Arc<Solver>>) -> SyncConfig {
        SyncConfig { prune: true, solver, budget: None, mutation: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeafKind {
    /// Both sides terminated.
    Init,
    /// Both sides reached the end of a loop iteration.
    Continue,
}

/// A completed branch and the condition holding at its start state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Leaf {
    pub kind: LeafKind,
    pub label: String,
    pub cond: BExpr,
}

/// Branch counts of one application of the rec rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecStats {
    pub generated: usize,
    pub kept: usize,
}

#[derive(Debug, Clone)]
pub struct SyncOutput {
    pub assertion: Assertion,
    pub obligations: Vec<Obligation>,
    pub leaves: Vec<Leaf>,
    pub rec_stats: Vec<RecStats>,
    pub pruned: Vec<PrunedBranch>,
    pub prune_stats: PruneStats,
}

/// `sync(chs, P, Q)` under `cond0`, using `rec_cond` as the loop condition.
pub fn synchronize(
    chs: &BTreeSet<String>,
    p: &NamedAssertion,
    q: &NamedAssertion,
    cond0: &BExpr,
    rec_cond: &BExpr,
    cfg: &SyncConfig,
) -> Result<(NamedAssertion, SyncOutput), SyncError> {
    if let Some(n) = p.names.iter().find(|n| q.names.contains(n)) {
        return Err(SyncError::Prefix(format!("process name `{n}` occurs on both sides")));
    }
    let mut eng = Engine::new(chs.clone(), rec_cond.clone(), cfg);
    let contradictory = cfg.prune && matches!(eng.pruner.decide(cond0), Decision::Infeasible(_));
    let a = if contradictory { Assertion::False } else { eng.sync(&p.assertion, &q.assertion, cond0)? };
    let names = p.names.iter().chain(&q.names).cloned().collect();
    let out = SyncOutput {
        assertion: a.clone(),
        obligations: eng.obligations,
        leaves: eng.leaves,
        rec_stats: eng.rec_stats,
        pruned: eng.pruner.pruned,
        prune_stats: eng.pruner.stats,
    };
    Ok((NamedAssertion { names, assertion: a }, out))
}

/// A waiting assertion read as `interrupt(path, time, tail, comms)`, with
/// `time = None` for the unbounded case.
#[derive(Debug, Clone)]
struct Int {
    path: PathAssertion,
    time: Option<Expr>,
    tail: Binder1,
    comms: Vec<CommSpec>,
}

impl Int {
    fn of(a: &Assertion) -> Option<Int> {
        let never = || Binder1::constant(Assertion::False);
        Some(match a {
            Assertion::Wait { path, time, body } => {
                Int { path: path.clone(), time: Some(time.clone()), tail: body.clone(), comms: vec![] }
            }
            Assertion::WaitIn { path, ch, body } => Int {
                path: path.clone(),
                time: None,
                tail: never(),
                comms: vec![CommSpec::In { ch: ch.clone(), body: body.clone() }],
            },
            Assertion::WaitOutv { path, ch, value, body } => Int {
                path: path.clone(),
                time: None,
                tail: never(),
                comms: vec![CommSpec::Out {
                    ch: ch.clone(),
                    value: ExprBinder::constant(value.clone()),
                    body: body.clone(),
                }],
            },
            Assertion::Interrupt { path, time, tail, comms } => {
                Int { path: path.clone(), time: Some(time.clone()), tail: tail.clone(), comms: comms.clone() }
            }
            Assertion::InterruptInf { path, comms } => {
                Int { path: path.clone(), time: None, tail: never(), comms: comms.clone() }
            }
            _ => return None,
        })
    }

    fn assertion(&self) -> Assertion {
        match &self.time {
            Some(e) => Assertion::Interrupt {
                path: self.path.clone(),
                time: e.clone(),
                tail: self.tail.clone(),
                comms: self.comms.clone(),
            },
            None => Assertion::InterruptInf { path: self.path.clone(), comms: self.comms.clone() },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Left,
    Right,
}

/// Range of a communication delay inside a merged interrupt.
#[derive(Debug, Clone)]
enum Limit {
    /// Only at time 0.
    Zero,
    Upto(Expr),
    Unbounded,
}

/// The partner of an external communication.
enum Partner<'a> {
    Waiting(&'a Int),
    Init,
}

/// A pair of loop continuations and the loop they synchronize into.
#[derive(Debug, Clone)]
struct HoleCtx {
    left: RecVar,
    right: RecVar,
    merged: RecVar,
}

struct Engine {
    chs: BTreeSet<String>,
    rec_cond: BExpr,
    prune: bool,
    mutation: Option<Mutation>,
    budget: Option<usize>,
    steps: usize,
    pruner: Pruner,
    next_name: usize,
    obligations: Vec<Obligation>,
    leaves: Vec<Leaf>,
    rec_stats: Vec<RecStats>,
    holes: Vec<HoleCtx>,
    /// Set while checking rec rule premises 1 and 2.
    premise: Option<u8>,
    trail: Vec<String>,
}

fn mentions_any(a: &Assertion, dom: &BTreeSet<String>) -> bool {
    a.vars().iter().any(|x| dom.contains(x))
}

fn count_holes(a: &Assertion, r: RecVar) -> usize {
    let mut n = 0;
    a.walk(&mut |x| {
        if *x == Assertion::Hole(r) {
            n += 1;
        }
    });
    n
}

impl Engine {
    fn new(chs: BTreeSet<String>, rec_cond: BExpr, cfg: &SyncConfig) -> Engine {
        Engine {
            chs,
            rec_cond,
            prune: cfg.prune,
            mutation: cfg.mutation,
            budget: cfg.budget,
            steps: 0,
            pruner: Pruner::new(cfg.solver.clone()),
            next_name: 0,
            obligations: Vec::new(),
            leaves: Vec::new(),
            rec_stats: Vec::new(),
            holes: Vec::new(),
            premise: None,
            trail: Vec::new(),
        }
    }

    fn mutated(&self, m: Mutation) -> bool {
        self.mutation == Some(m)
    }

    fn label(&self) -> String {
        if self.trail.is_empty() {
            "top".into()
        } else {
            self.trail.join("/")
        }
    }

    fn at<T>(&mut self, step: impl Into<String>, f: impl FnOnce(&mut Engine) -> T) -> T {
        self.trail.push(step.into());
        let out = f(self);
        self.trail.pop();
        out
    }

    fn fresh_param(&mut self, x: &str) -> String {
        self.next_name += 1;
        format!("{x}#{}", self.next_name)
    }

    fn delay(&self, d: &Expr, i: &Int) -> Result<Int, SyncError> {
        let a = delay_with(d, &i.assertion(), !self.mutated(Mutation::DelayNoShift))?;
        Ok(Int::of(&a).expect("delay preserves waiting assertions"))
    }

    fn merge_paths(&self, a: &PathAssertion, b: &PathAssertion) -> Result<PathAssertion, SyncError> {
        if self.mutated(Mutation::PathMergeDrop) {
            return Ok(a.clone());
        }
        Ok(a.merge(b)?)
    }

    fn sync(&mut self, p: &Assertion, q: &Assertion, cond: &BExpr) -> Result<Assertion, SyncError> {
        self.steps += 1;
        if let Some(b) = self.budget.filter(|b| self.steps > *b) {
            return Err(SyncError::Budget(b));
        }
        let p = normalize(p);
        let q = normalize(q);
        let r = self.step(&p, &q, cond)?;
        Ok(normalize(&r))
    }

    fn step(&mut self, p: &Assertion, q: &Assertion, cond: &BExpr) -> Result<Assertion, SyncError> {
        use Assertion as A;
        match (p, q) {
            (A::False, _) | (_, A::False) => Ok(A::False),
            (A::Or(a, b), _) => {
                let l = self.at("or.l", |s| s.sync(a, q, cond))?;
                let r = self.at("or.r", |s| s.sync(b, q, cond))?;
                Ok(A::or(l, r))
            }
            (_, A::Or(a, b)) => {
                let l = self.at("or.l", |s| s.sync(p, a, cond))?;
                let r = self.at("or.r", |s| s.sync(p, b, cond))?;
                Ok(A::or(l, r))
            }
            (A::Guard(b, x), _) => self.guarded(b, cond, "guard", |s, c| s.sync(x, q, c)),
            (_, A::Guard(b, y)) => self.guarded(b, cond, "guard", |s, c| s.sync(p, y, c)),
            (A::Subst(..), _) | (_, A::Subst(..)) => self.subst_rule(p, q, cond),
            (A::Hole(r1), A::Hole(r2)) => self.hole_rule(*r1, *r2, cond),
            (A::Hole(_), _) | (_, A::Hole(_)) => {
                let node = if matches!(p, A::Hole(_)) { q } else { p };
                match self.premise {
                    Some(n) => Err(SyncError::RecPremise {
                        premise: n,
                        detail: format!("one side starts a new iteration while the other is at `{node}`"),
                    }),
                    None => Err(SyncError::Hole(format!("sync({p}, {q})"))),
                }
            }
            (A::Rec { var: v1, base: b1, step: s1 }, A::Rec { var: v2, base: b2, step: s2 }) => {
                self.rec_rule((*v1, b1, s1), (*v2, b2, s2), cond)
            }
            (A::Init, A::Init) => {
                self.leaves.push(Leaf { kind: LeafKind::Init, label: self.label(), cond: cond.clone() });
                Ok(A::Init)
            }
            (A::Init, w) => match Int::of(w) {
                Some(i) => self.at("init", |s| s.int_init(&i, Side::Right, cond)),
                None => Err(SyncError::Unsupported(format!("sync({p}, {q})"))),
            },
            (w, A::Init) => match Int::of(w) {
                Some(i) => self.at("init", |s| s.int_init(&i, Side::Left, cond)),
                None => Err(SyncError::Unsupported(format!("sync({p}, {q})"))),
            },
            _ => match (Int::of(p), Int::of(q)) {
                (Some(i1), Some(i2)) => self.int_int(&i1, &i2, cond),
                _ => Err(SyncError::Unsupported(format!("sync({p}, {q})"))),
            },
        }
    }

    /// Bool rule: `↑b ∧ f(cond ∧ b)`, or `false` when `cond ∧ b` is refuted.
    fn guarded(
        &mut self,
        b: &BExpr,
        cond: &BExpr,
        step: &str,
        f: impl FnOnce(&mut Engine, &BExpr) -> Result<Assertion, SyncError>,
    ) -> Result<Assertion, SyncError> {
        let b = b.simplify();
        match b {
            BExpr::False => return Ok(Assertion::False),
            BExpr::True => return f(self, cond),
            _ => {}
        }
        let c = BExpr::and_s(cond.clone(), b.clone());
        if self.prune {
            match self.pruner.decide(&c) {
                Decision::Infeasible(_) => return Ok(Assertion::False),
                Decision::Feasible => {}
                Decision::Undecided => {
                    let label = format!("{}/{step}", self.label());
                    self.obligations.push(Obligation::new(ObligationKind::Feasibility, label, c.clone(), BExpr::False));
                }
            }
        }
        let body = self.at(step, |s| f(s, &c))?;
        Ok(Assertion::guard(b, body))
    }

    /// Drops the disjuncts of `alts` that contradict `cond`.
    fn feasible_disj(&mut self, cond: &BExpr, alts: Vec<BExpr>) -> BExpr {
        let alts: Vec<BExpr> = alts.into_iter().map(|a| a.simplify()).filter(|a| *a != BExpr::False).collect();
        if !self.prune || alts.len() < 2 {
            return BExpr::disj(alts);
        }
        let kept: Vec<BExpr> = alts
            .iter()
            .filter(|a| self.pruner.satisfiable(&BExpr::and_s(cond.clone(), (*a).clone())))
            .cloned()
            .collect();
        if kept.is_empty() {
            BExpr::disj(alts)
        } else {
            BExpr::disj(kept)
        }
    }

    // ---------------------------------------------------------------- subst

    fn subst_rule(&mut self, p: &Assertion, q: &Assertion, cond: &BExpr) -> Result<Assertion, SyncError> {
        let dom_of = |a: &Assertion| -> Option<BTreeSet<String>> {
            match a {
                Assertion::Subst(_, s) => Some(s.iter().map(|(x, _)| x.clone()).collect()),
                _ => None,
            }
        };
        let (ld, rd) = (dom_of(p), dom_of(q));
        let left_free = ld.as_ref().is_some_and(|d| !mentions_any(q, d));
        let right_free = rd.as_ref().is_some_and(|d| !mentions_any(p, d));
        let side = if left_free {
            Side::Left
        } else if right_free {
            Side::Right
        } else if ld.is_some() {
            Side::Left
        } else {
            Side::Right
        };
        let (this, other) = match side {
            Side::Left => (p, q),
            Side::Right => (q, p),
        };
        let Assertion::Subst(inner, sigma) = this else { unreachable!("side has a substitution") };
        let dom: BTreeSet<String> = sigma.iter().map(|(x, _)| x.clone()).collect();
        // The other side reads variables the substitution changes (values
        // received from this side): freeze them as parameters bound to their
        // current values.
        let frozen: Vec<(String, String)> =
            other.vars().into_iter().filter(|x| dom.contains(x)).map(|x| (x.clone(), self.fresh_param(&x))).collect();
        let (other_f, freeze) = if frozen.is_empty() {
            (other.clone(), BExpr::True)
        } else {
            let map: BTreeMap<String, Expr> = frozen.iter().map(|(x, n)| (x.clone(), Expr::param(n))).collect();
            let o = other.map_exprs(&mut |e| e.subst_vars(&map));
            let f = BExpr::conj(frozen.iter().map(|(x, n)| BExpr::eq(Expr::param(n), Expr::var(x))));
            (o, f)
        };
        let cond_f = BExpr::and_s(cond.clone(), freeze.clone());
        let cond2 = self.post_cond(&cond_f, sigma);
        let synced = self.at("subst", |s| match side {
            Side::Left => s.sync(inner, &other_f, &cond2),
            Side::Right => s.sync(&other_f, inner, &cond2),
        })?;
        let pulled =
            if self.mutated(Mutation::SubstDrop) { synced } else { Assertion::subst_many(synced, sigma.clone()) };
        Ok(if freeze == BExpr::True { pulled } else { Assertion::guard(freeze, pulled) })
    }

    /// The condition on the state after `σ` given `cond` before it.
    fn post_cond(&mut self, cond: &BExpr, sigma: &[(String, Expr)]) -> BExpr {
        let dom: BTreeSet<String> = sigma.iter().map(|(x, _)| x.clone()).collect();
        let mut old: BTreeMap<String, Expr> = BTreeMap::new();
        let mut pending: Vec<&(String, Expr)> = sigma.iter().collect();
        // Triangular inversion of `x := c·x + r` with `r` over unchanged or
        // already inverted variables.
        loop {
            let before = pending.len();
            pending.retain(|(x, e)| {
                let Some((c, r)) = affine_in(e, x) else { return true };
                if r.vars().iter().any(|y| dom.contains(y) && !old.contains_key(y)) {
                    return true;
                }
                let r_old = r.subst_vars(&old);
                old.insert(x.clone(), ((Expr::var(x) - r_old) / c).simplify());
                false
            });
            if pending.len() == before {
                break;
            }
        }
        let cond_vars = cond.vars();
        let cheap = pending.iter().all(|(x, e)| {
            !cond_vars.contains(x)
                && !old.values().any(|o| o.mentions_var(x))
                && e.vars().iter().all(|y| !dom.contains(y) || old.contains_key(y))
        });
        if cheap {
            let mut out = cond.subst_vars(&old);
            for (x, e) in pending {
                out = BExpr::and_s(out, BExpr::eq(Expr::var(x), e.subst_vars(&old)));
            }
            return out.simplify();
        }
        // ∃ xs. cond[x := xs] ∧ x = e[x := xs]
        let names: Vec<(String, String)> = dom.iter().map(|x| (x.clone(), self.fresh_param(x))).collect();
        let to_param: BTreeMap<String, Expr> = names.iter().map(|(x, n)| (x.clone(), Expr::param(n))).collect();
        let mut body = cond.subst_vars(&to_param);
        for (x, e) in sigma {
            body = BExpr::and_s(body, BExpr::eq(Expr::var(x), e.subst_vars(&to_param)));
        }
        BExpr::Exists(names.into_iter().map(|(_, n)| n).collect(), Box::new(body)).simplify()
    }

    // ----------------------------------------------------------------- loops

    fn hole_rule(&mut self, r1: RecVar, r2: RecVar, cond: &BExpr) -> Result<Assertion, SyncError> {
        if let Some(n) = self.premise {
            return Err(SyncError::RecPremise { premise: n, detail: "the loop body synchronizes with itself".into() });
        }
        let Some(ctx) = self.holes.iter().rev().find(|h| h.left == r1 && h.right == r2).cloned() else {
            return Err(SyncError::Hole(format!("sync({}, {})", Assertion::Hole(r1), Assertion::Hole(r2))));
        };
        let label = self.label();
        self.obligations.push(Obligation::new(
            ObligationKind::RecCondInductive,
            label.clone(),
            cond.clone(),
            self.rec_cond.clone(),
        ));
        self.leaves.push(Leaf { kind: LeafKind::Continue, label, cond: cond.clone() });
        Ok(Assertion::Hole(ctx.merged))
    }

    fn rec_rule(
        &mut self,
        (v1, p1, f1): (RecVar, &Assertion, &Assertion),
        (v2, p2, f2): (RecVar, &Assertion, &Assertion),
        cond: &BExpr,
    ) -> Result<Assertion, SyncError> {
        let rc = self.rec_cond.clone();
        self.obligations.push(Obligation::new(ObligationKind::RecCondEntry, self.label(), cond.clone(), rc.clone()));
        for (n, a, b) in [(1u8, p1, f2), (2u8, f1, p2)] {
            let saved = (self.obligations.len(), self.leaves.len(), self.premise);
            self.premise = Some(n);
            let r = self.at(format!("rec.premise{n}"), |s| s.sync(a, b, &rc));
            self.premise = saved.2;
            self.obligations.truncate(saved.0);
            self.leaves.truncate(saved.1);
            let r = r?;
            if r != Assertion::False {
                return Err(SyncError::RecPremise {
                    premise: n,
                    detail: format!("the synchronization is not false: {r}"),
                });
            }
        }
        let base = self.at("rec.base", |s| s.sync(p1, p2, &rc))?;
        let merged = RecVar::fresh();
        self.holes.push(HoleCtx { left: v1, right: v2, merged });
        let step = self.at("rec.step", |s| s.sync(f1, f2, &rc));
        let generated = if self.prune {
            let mut loose =
                Engine::new(self.chs.clone(), rc.clone(), &SyncConfig { budget: self.budget, ..SyncConfig::default() });
            loose.mutation = self.mutation;
            loose.holes = self.holes.clone();
            loose.sync(f1, f2, &rc).map(|a| count_holes(&a, merged))
        } else {
            Ok(0)
        };
        self.holes.pop();
        let step = step?;
        let kept = count_holes(&step, merged);
        let generated = if self.prune { generated? } else { kept };
        self.rec_stats.push(RecStats { generated, kept });
        Ok(Assertion::Rec { var: merged, base: Box::new(base), step: Box::new(step) })
    }

    // ------------------------------------------------------------- waiting

    fn external(&self, cm: &[CommSpec]) -> Vec<CommSpec> {
        cm.iter().filter(|c| !self.chs.contains(c.channel())).cloned().collect()
    }

    /// `0 ≤ d ≤ e` (with `d = 0` when `e ≤ 0`), or `d ≥ 0` unbounded.
    fn comm_range(&mut self, cond: &BExpr, limit: &Limit, d: &Expr) -> BExpr {
        match limit {
            Limit::Zero => BExpr::eq(d.clone(), Expr::zero()),
            Limit::Unbounded => BExpr::ge(d.clone(), Expr::zero()),
            Limit::Upto(e) => {
                let within =
                    self.feasible_disj(cond, vec![BExpr::le(d.clone(), e.clone()), BExpr::eq(d.clone(), Expr::zero())]);
                BExpr::and_s(BExpr::ge(d.clone(), Expr::zero()), within)
            }
        }
    }

    /// `d = e` when `e > 0`, else `d = 0`.
    fn tail_range(&mut self, cond: &BExpr, e: &Expr, d: &Expr) -> BExpr {
        self.feasible_disj(
            cond,
            vec![
                BExpr::and(BExpr::gt(e.clone(), Expr::zero()), BExpr::eq(d.clone(), e.clone())),
                BExpr::and(BExpr::le(e.clone(), Expr::zero()), BExpr::eq(d.clone(), Expr::zero())),
            ],
        )
    }

    /// `rel1` (`side = Left`) or `rel2` (`side = Right`) of the external
    /// communications `ext` of one side against its partner.
    fn rels(
        &mut self,
        ext: &[CommSpec],
        partner: Partner<'_>,
        side: Side,
        limit: &Limit,
        cond: &BExpr,
    ) -> Result<Vec<CommSpec>, SyncError> {
        let mut out = Vec::with_capacity(ext.len());
        for c in ext {
            let d = BoundVar::fresh(BoundKind::Delay);
            let (dv, c_cond) = match limit {
                Limit::Zero => (Expr::zero(), cond.clone()),
                _ => {
                    let dv = Expr::Bound(d);
                    let r = self.comm_range(cond, limit, &dv);
                    (dv, BExpr::and_s(cond.clone(), r))
                }
            };
            let other = match &partner {
                Partner::Init => Assertion::Init,
                Partner::Waiting(i) => match limit {
                    Limit::Zero => i.assertion(),
                    _ => self.delay(&dv, i)?.assertion(),
                },
            };
            let pair = |mine: Assertion| match side {
                Side::Left => (mine, other.clone()),
                Side::Right => (other.clone(), mine),
            };
            let step = format!("ext.{}", c.channel());
            out.push(match c {
                CommSpec::In { ch, body } => {
                    let v = BoundVar::fresh(BoundKind::Value);
                    let (a, b) = pair(body.apply(&dv, &Expr::Bound(v)));
                    let synced = self.at(step, |s| s.sync(&a, &b, &c_cond))?;
                    CommSpec::In { ch: ch.clone(), body: Binder2 { d, v, body: Box::new(synced) } }
                }
                CommSpec::Out { ch, value, body } => {
                    let (a, b) = pair(body.apply(&dv));
                    let synced = self.at(step, |s| s.sync(&a, &b, &c_cond))?;
                    CommSpec::Out { ch: ch.clone(), value: value.clone(), body: Binder1 { d, body: Box::new(synced) } }
                }
            });
        }
        Ok(out)
    }

    fn int_int(&mut self, i1: &Int, i2: &Int, cond: &BExpr) -> Result<Assertion, SyncError> {
        if compat(&rdy(&i1.comms), &rdy(&i2.comms), &self.chs) {
            self.compat_case(i1, i2, cond)
        } else {
            self.at("handshake", |s| s.incompat_case(i1, i2, cond))
        }
    }

    fn compat_case(&mut self, i1: &Int, i2: &Int, cond: &BExpr) -> Result<Assertion, SyncError> {
        let path = self.merge_paths(&i1.path, &i2.path)?;
        match (&i1.time, &i2.time) {
            (None, None) => {
                let ext1 = self.external(&i1.comms);
                let ext2 = self.external(&i2.comms);
                let mut comms = self.rels(&ext1, Partner::Waiting(i2), Side::Left, &Limit::Unbounded, cond)?;
                comms.extend(self.rels(&ext2, Partner::Waiting(i1), Side::Right, &Limit::Unbounded, cond)?);
                Ok(Assertion::InterruptInf { path, comms })
            }
            // An unbounded side waits longer than any finite time.
            (Some(e1), None) => self.at("wait.l", |s| s.min_case(i1, i2, e1, &[Side::Left], &path, cond)),
            (None, Some(e2)) => self.at("wait.r", |s| s.min_case(i1, i2, e2, &[Side::Right], &path, cond)),
            (Some(e1), Some(e2)) => {
                let zero = Expr::zero;
                let lt = BExpr::and(BExpr::lt(e1.clone(), e2.clone()), BExpr::gt(e2.clone(), zero()));
                let gt = BExpr::and(BExpr::lt(e2.clone(), e1.clone()), BExpr::gt(e1.clone(), zero()));
                let eq = BExpr::or(
                    BExpr::eq(e1.clone(), e2.clone()),
                    BExpr::and(BExpr::le(e1.clone(), zero()), BExpr::le(e2.clone(), zero())),
                );
                let first = if self.mutated(Mutation::WaitMinSwap) { e2 } else { e1 };
                let a = self.guarded(&lt, cond, "wait<", |s, c| s.min_case(i1, i2, first, &[Side::Left], &path, c))?;
                let b = self.guarded(&gt, cond, "wait>", |s, c| s.min_case(i1, i2, e2, &[Side::Right], &path, c))?;
                let both = [Side::Left, Side::Right];
                let c = self.guarded(&eq, cond, "wait=", |s, c| s.min_case(i1, i2, e1, &both, &path, c))?;
                Ok(Assertion::disj([a, b, c]))
            }
        }
    }

    /// Merged interrupt waiting for `e`, after which the sides in `ending`
    /// continue with their tails while the other stays delayed.
    fn min_case(
        &mut self,
        i1: &Int,
        i2: &Int,
        e: &Expr,
        ending: &[Side],
        path: &PathAssertion,
        cond: &BExpr,
    ) -> Result<Assertion, SyncError> {
        let d = BoundVar::fresh(BoundKind::Delay);
        let dv = Expr::Bound(d);
        let range = self.tail_range(cond, e, &dv);
        let tcond = BExpr::and_s(cond.clone(), range);
        let mut tails = Vec::new();
        for side in ending {
            let t = match side {
                Side::Left => {
                    let other = self.delay(&dv, i2)?.assertion();
                    self.at("tail.l", |s| s.sync(&i1.tail.apply(&dv), &other, &tcond))?
                }
                Side::Right => {
                    let other = self.delay(&dv, i1)?.assertion();
                    self.at("tail.r", |s| s.sync(&other, &i2.tail.apply(&dv), &tcond))?
                }
            };
            tails.push(t);
        }
        let limit = Limit::Upto(e.clone());
        let ext1 = self.external(&i1.comms);
        let ext2 = self.external(&i2.comms);
        let mut comms = self.rels(&ext1, Partner::Waiting(i2), Side::Left, &limit, cond)?;
        comms.extend(self.rels(&ext2, Partner::Waiting(i1), Side::Right, &limit, cond)?);
        Ok(Assertion::Interrupt {
            path: path.clone(),
            time: e.clone(),
            tail: Binder1 { d, body: Box::new(Assertion::disj(tails)) },
            comms,
        })
    }

    /// `comm(cm1, cm2)`: every handshake over a shared channel at time 0.
    fn comm(&mut self, i1: &Int, i2: &Int, cond: &BExpr) -> Result<Vec<Assertion>, SyncError> {
        let mut out = Vec::new();
        let zero = Expr::zero();
        for c1 in &i1.comms {
            for c2 in &i2.comms {
                if c1.channel() != c2.channel() || !self.chs.contains(c1.channel()) {
                    continue;
                }
                let ch = c1.channel().to_string();
                let (sent, l, r) = match (c1, c2) {
                    (CommSpec::In { body: p, .. }, CommSpec::Out { value: f, body: q, .. }) => {
                        let v = f.apply(&zero).simplify();
                        let got = if self.mutated(Mutation::CommValueZero) { Expr::zero() } else { v.clone() };
                        (v, p.apply(&zero, &got), q.apply(&zero))
                    }
                    (CommSpec::Out { value: f, body: p, .. }, CommSpec::In { body: q, .. }) => {
                        let v = f.apply(&zero).simplify();
                        let got = if self.mutated(Mutation::CommValueZero) { Expr::zero() } else { v.clone() };
                        (v, p.apply(&zero), q.apply(&zero, &got))
                    }
                    _ => continue,
                };
                let body = self.at(format!("io.{ch}"), |s| s.sync(&l, &r, cond))?;
                out.push(Assertion::Io { ch, value: sent, body: Box::new(body) });
            }
        }
        Ok(out)
    }

    fn incompat_case(&mut self, i1: &Int, i2: &Int, cond: &BExpr) -> Result<Assertion, SyncError> {
        let path = self.merge_paths(&i1.path, &i2.path)?;
        let zero = Expr::zero();
        let mut parts = self.comm(i1, i2, cond)?;
        if let Some(e1) = &i1.time {
            let other = i2.assertion();
            let r = self.guarded(&BExpr::le(e1.clone(), zero.clone()), cond, "tail.l", |s, c| {
                s.sync(&i1.tail.apply(&zero), &other, c)
            })?;
            parts.push(r);
        }
        if let Some(e2) = &i2.time {
            let other = i1.assertion();
            let r = self.guarded(&BExpr::le(e2.clone(), zero.clone()), cond, "tail.r", |s, c| {
                s.sync(&other, &i2.tail.apply(&zero), c)
            })?;
            parts.push(r);
        }
        let ext1 = self.external(&i1.comms);
        let ext2 = self.external(&i2.comms);
        let mut comms = self.rels(&ext1, Partner::Waiting(i2), Side::Left, &Limit::Zero, cond)?;
        comms.extend(self.rels(&ext2, Partner::Waiting(i1), Side::Right, &Limit::Zero, cond)?);
        Ok(Assertion::Interrupt { path, time: zero, tail: Binder1::constant(Assertion::disj(parts)), comms })
    }

    /// One side waiting, the other terminated (`side` is the waiting one).
    fn int_init(&mut self, i: &Int, side: Side, cond: &BExpr) -> Result<Assertion, SyncError> {
        let zero = Expr::zero();
        let tail = match &i.time {
            Some(e) => self.guarded(&BExpr::le(e.clone(), zero.clone()), cond, "tail", |s, c| {
                let t = i.tail.apply(&zero);
                match side {
                    Side::Left => s.sync(&t, &Assertion::Init, c),
                    Side::Right => s.sync(&Assertion::Init, &t, c),
                }
            })?,
            None => Assertion::False,
        };
        let ext = self.external(&i.comms);
        let comms = self.rels(&ext, Partner::Init, side, &Limit::Zero, cond)?;
        Ok(Assertion::Interrupt { path: i.path.clone(), time: zero, tail: Binder1::constant(tail), comms })
    }
}

/// `e = c·x + r` with `c` a non-zero constant and `r` free of `x`.
fn affine_in(e: &Expr, x: &str) -> Option<(Expr, Expr)> {
    if !e.mentions_var(x) {
        return None;
    }
    let step = e.substitute(x, &(Expr::var(x) + Expr::int(1))) - e.clone();
    let c = Poly::from_expr(&step).as_const()?;
    if num_traits::Zero::is_zero(&c) {
        return None;
    }
    let r = e.substitute(x, &Expr::zero()).simplify();
    Some((Expr::constant(c), r))
}

#[cfg(test)]
mod tests;
