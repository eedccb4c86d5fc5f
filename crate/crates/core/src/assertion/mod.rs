//! Parameterized trace assertions, path assertions and the rewrite calculus
//! over them (substitution pushdown, delay, normalization, monotone rewriting).
//!
//! An assertion denotes a predicate on a starting state `s0`, a final state
//! and a trace. Program variables occurring in expressions refer to `s0`.
//! Binders (`{d => P}`, `{(d,v) => P}`) use globally fresh [`BoundVar`]s
//! rather than indices; substitution renames a binder whenever it would
//! capture a free variable of the substituted expression.

mod ops;
mod pretty;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

use crate::chan::{Dir, Rdy};
use crate::expr::{BExpr, BoundKind, BoundVar, Expr};

#[doc(hidden)]
pub use ops::delay_with;
pub use ops::{delay, delay_cm, mono_rewrite, normalize, push_subst, Position};
pub use pretty::AssertionNames;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KernelError {
    #[error("delay applies only to waiting assertions, got `{0}`")]
    NotWaiting(String),
    #[error("invalid position {0:?}")]
    Position(Vec<usize>),
    #[error("path assertions overlap on `{0}`")]
    PathOverlap(String),
}

/// A path assertion `s = s0[x ↦ e, ...]`; variables not in `map` stay at
/// their starting value. The empty map is `id_inv`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PathAssertion {
    pub map: BTreeMap<String, Expr>,
}

impl PathAssertion {
    pub fn id() -> PathAssertion {
        PathAssertion::default()
    }

    pub fn solution(map: BTreeMap<String, Expr>) -> PathAssertion {
        PathAssertion { map }.canonical()
    }

    pub fn is_id(&self) -> bool {
        self.map.is_empty()
    }

    /// Value of `x` along the path (as an expression over `s0` and `t`).
    pub fn at(&self, x: &str) -> Expr {
        self.map.get(x).cloned().unwrap_or_else(|| Expr::var(x))
    }

    /// `I[t := t+d]`.
    pub fn delayed(&self, d: &Expr) -> PathAssertion {
        let sigma = BTreeMap::from([(BoundVar::TIME, Expr::time() + d.clone())]);
        PathAssertion { map: self.map.iter().map(|(x, e)| (x.clone(), e.subst_bound(&sigma))).collect() }.canonical()
    }

    /// `I[σ]` on the starting-state coordinates.
    pub fn subst(&self, sigma: &BTreeMap<String, Expr>) -> PathAssertion {
        let mut map: BTreeMap<String, Expr> = self.map.iter().map(|(x, e)| (x.clone(), e.subst_vars(sigma))).collect();
        for (y, e) in sigma {
            map.entry(y.clone()).or_insert_with(|| e.clone());
        }
        PathAssertion { map }.canonical()
    }

    pub fn subst_bound(&self, sigma: &BTreeMap<BoundVar, Expr>) -> PathAssertion {
        PathAssertion { map: self.map.iter().map(|(x, e)| (x.clone(), e.subst_bound(sigma))).collect() }
    }

    /// `I1 ⊎ I2` for paths over disjoint variables.
    pub fn merge(&self, other: &PathAssertion) -> Result<PathAssertion, KernelError> {
        let mut map = self.map.clone();
        for (x, e) in &other.map {
            if map.insert(x.clone(), e.clone()).is_some() {
                return Err(KernelError::PathOverlap(x.clone()));
            }
        }
        Ok(PathAssertion { map })
    }

    pub fn rename_vars(&self, f: &dyn Fn(&str) -> String) -> PathAssertion {
        PathAssertion { map: self.map.iter().map(|(x, e)| (f(x), e.rename_vars(f))).collect() }
    }

    /// Simplifies entries and drops identity entries `x ↦ x`.
    pub fn canonical(self) -> PathAssertion {
        let map = self
            .map
            .into_iter()
            .map(|(x, e)| {
                let e = e.simplify();
                (x, e)
            })
            .filter(|(x, e)| *e != Expr::var(x))
            .collect();
        PathAssertion { map }
    }
}

/// Identifier of a recursion variable `R` in `rec R. P ∨ F(R)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RecVar(pub u64);

static NEXT_REC: AtomicU64 = AtomicU64::new(1);

impl RecVar {
    pub fn fresh() -> RecVar {
        RecVar(NEXT_REC.fetch_add(1, Ordering::Relaxed))
    }
}

/// `{d => P}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binder1 {
    pub d: BoundVar,
    pub body: Box<Assertion>,
}

/// `{(d, v) => P}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binder2 {
    pub d: BoundVar,
    pub v: BoundVar,
    pub body: Box<Assertion>,
}

/// `{d => e}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExprBinder {
    pub d: BoundVar,
    pub expr: Expr,
}

impl Binder1 {
    /// Builds `{d => f(d)}` with a fresh `d`.
    pub fn new(f: impl FnOnce(&Expr) -> Assertion) -> Binder1 {
        let d = BoundVar::fresh(BoundKind::Delay);
        let body = f(&Expr::Bound(d));
        Binder1 { d, body: Box::new(body) }
    }

    /// Binder ignoring its argument.
    pub fn constant(body: Assertion) -> Binder1 {
        Binder1::new(|_| body)
    }

    pub fn apply(&self, e: &Expr) -> Assertion {
        self.body.subst_bound(&BTreeMap::from([(self.d, e.clone())]))
    }

    pub fn map_body(&self, f: impl FnOnce(&Assertion) -> Assertion) -> Binder1 {
        Binder1 { d: self.d, body: Box::new(f(&self.body)) }
    }
}

impl Binder2 {
    pub fn new(f: impl FnOnce(&Expr, &Expr) -> Assertion) -> Binder2 {
        let d = BoundVar::fresh(BoundKind::Delay);
        let v = BoundVar::fresh(BoundKind::Value);
        let body = f(&Expr::Bound(d), &Expr::Bound(v));
        Binder2 { d, v, body: Box::new(body) }
    }

    pub fn apply(&self, d: &Expr, v: &Expr) -> Assertion {
        self.body.subst_bound(&BTreeMap::from([(self.d, d.clone()), (self.v, v.clone())]))
    }

    pub fn map_body(&self, f: impl FnOnce(&Assertion) -> Assertion) -> Binder2 {
        Binder2 { d: self.d, v: self.v, body: Box::new(f(&self.body)) }
    }
}

impl ExprBinder {
    pub fn new(f: impl FnOnce(&Expr) -> Expr) -> ExprBinder {
        let d = BoundVar::fresh(BoundKind::Delay);
        let expr = f(&Expr::Bound(d));
        ExprBinder { d, expr }
    }

    pub fn constant(expr: Expr) -> ExprBinder {
        ExprBinder::new(|_| expr)
    }

    pub fn apply(&self, e: &Expr) -> Expr {
        self.expr.subst_bound(&BTreeMap::from([(self.d, e.clone())]))
    }

    pub fn mentions_arg(&self) -> bool {
        self.expr.mentions_bound(self.d)
    }
}

/// An entry of an interrupt's communication list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CommSpec {
    /// `<ch?, {(d,v) => Q}>`
    In { ch: String, body: Binder2 },
    /// `<ch!, {d => f}, {d => Q}>`
    Out { ch: String, value: ExprBinder, body: Binder1 },
}

impl CommSpec {
    pub fn channel(&self) -> &str {
        match self {
            CommSpec::In { ch, .. } | CommSpec::Out { ch, .. } => ch,
        }
    }

    pub fn dir(&self) -> Dir {
        match self {
            CommSpec::In { .. } => Dir::In,
            CommSpec::Out { .. } => Dir::Out,
        }
    }
}

/// `rdy(cm)`.
pub fn rdy(cm: &[CommSpec]) -> Rdy {
    cm.iter().map(|c| (c.channel().to_string(), c.dir())).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Assertion {
    True,
    False,
    Init,
    And(Box<Assertion>, Box<Assertion>),
    Or(Box<Assertion>, Box<Assertion>),
    /// `↑b ∧ P`.
    Guard(BExpr, Box<Assertion>),
    /// `P[x := e, ...]`, a simultaneous substitution on the starting state.
    Subst(Box<Assertion>, Vec<(String, Expr)>),
    WaitIn {
        path: PathAssertion,
        ch: String,
        body: Binder2,
    },
    WaitOutv {
        path: PathAssertion,
        ch: String,
        value: Expr,
        body: Binder1,
    },
    Wait {
        path: PathAssertion,
        time: Expr,
        body: Binder1,
    },
    Interrupt {
        path: PathAssertion,
        time: Expr,
        tail: Binder1,
        comms: Vec<CommSpec>,
    },
    InterruptInf {
        path: PathAssertion,
        comms: Vec<CommSpec>,
    },
    /// A synchronized communication `<ch, e>` followed by `P`.
    Io {
        ch: String,
        value: Expr,
        body: Box<Assertion>,
    },
    /// `rec R. base ∨ step`, where `step` mentions `Hole(R)`.
    Rec {
        var: RecVar,
        base: Box<Assertion>,
        step: Box<Assertion>,
    },
    Hole(RecVar),
    /// Unresolved `sync(chs, P, Q)`.
    Sync {
        chs: BTreeSet<String>,
        left: Box<Assertion>,
        right: Box<Assertion>,
    },
}

impl Assertion {
    pub fn or(a: Assertion, b: Assertion) -> Assertion {
        Assertion::Or(Box::new(a), Box::new(b))
    }

    pub fn and(a: Assertion, b: Assertion) -> Assertion {
        Assertion::And(Box::new(a), Box::new(b))
    }

    pub fn guard(b: BExpr, p: Assertion) -> Assertion {
        Assertion::Guard(b, Box::new(p))
    }

    pub fn subst(p: Assertion, x: &str, e: Expr) -> Assertion {
        Assertion::Subst(Box::new(p), vec![(x.to_string(), e)])
    }

    pub fn subst_many(p: Assertion, sigma: Vec<(String, Expr)>) -> Assertion {
        Assertion::Subst(Box::new(p), sigma)
    }

    pub fn sync(chs: BTreeSet<String>, left: Assertion, right: Assertion) -> Assertion {
        Assertion::Sync { chs, left: Box::new(left), right: Box::new(right) }
    }

    pub fn disj(items: impl IntoIterator<Item = Assertion>) -> Assertion {
        let mut it = items.into_iter();
        match it.next() {
            None => Assertion::False,
            Some(first) => it.fold(first, Assertion::or),
        }
    }

    /// Immediate sub-assertions, in position order.
    pub fn children(&self) -> Vec<&Assertion> {
        match self {
            Assertion::True | Assertion::False | Assertion::Init | Assertion::Hole(_) => vec![],
            Assertion::And(a, b) | Assertion::Or(a, b) => vec![a, b],
            Assertion::Guard(_, p) | Assertion::Subst(p, _) => vec![p],
            Assertion::WaitIn { body, .. } => vec![&body.body],
            Assertion::WaitOutv { body, .. } | Assertion::Wait { body, .. } => vec![&body.body],
            Assertion::Interrupt { tail, comms, .. } => {
                let mut v: Vec<&Assertion> = vec![&tail.body];
                v.extend(comms.iter().map(comm_body));
                v
            }
            Assertion::InterruptInf { comms, .. } => comms.iter().map(comm_body).collect(),
            Assertion::Io { body, .. } => vec![body],
            Assertion::Rec { base, step, .. } => vec![base, step],
            Assertion::Sync { left, right, .. } => vec![left, right],
        }
    }

    /// Pre-order traversal.
    pub fn walk(&self, f: &mut dyn FnMut(&Assertion)) {
        f(self);
        for c in self.children() {
            c.walk(f);
        }
    }

    pub fn contains_sync(&self) -> bool {
        let mut found = false;
        self.walk(&mut |a| found |= matches!(a, Assertion::Sync { .. }));
        found
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        let mut n = 0;
        self.walk(&mut |_| n += 1);
        n
    }

    /// Applies `f` to every expression (including guards, path entries,
    /// substitution images and binder expressions) without entering names.
    pub fn map_exprs(&self, f: &mut dyn FnMut(&Expr) -> Expr) -> Assertion {
        let path = |p: &PathAssertion, f: &mut dyn FnMut(&Expr) -> Expr| PathAssertion {
            map: p.map.iter().map(|(x, e)| (x.clone(), f(e))).collect(),
        };
        match self {
            Assertion::True | Assertion::False | Assertion::Init | Assertion::Hole(_) => self.clone(),
            Assertion::And(a, b) => Assertion::and(a.map_exprs(f), b.map_exprs(f)),
            Assertion::Or(a, b) => Assertion::or(a.map_exprs(f), b.map_exprs(f)),
            Assertion::Guard(b, p) => Assertion::guard(b.map_exprs(f), p.map_exprs(f)),
            Assertion::Subst(p, sigma) => {
                Assertion::Subst(Box::new(p.map_exprs(f)), sigma.iter().map(|(x, e)| (x.clone(), f(e))).collect())
            }
            Assertion::WaitIn { path: p, ch, body } => {
                Assertion::WaitIn { path: path(p, f), ch: ch.clone(), body: body.map_body(|b| b.map_exprs(f)) }
            }
            Assertion::WaitOutv { path: p, ch, value, body } => Assertion::WaitOutv {
                path: path(p, f),
                ch: ch.clone(),
                value: f(value),
                body: body.map_body(|b| b.map_exprs(f)),
            },
            Assertion::Wait { path: p, time, body } => {
                Assertion::Wait { path: path(p, f), time: f(time), body: body.map_body(|b| b.map_exprs(f)) }
            }
            Assertion::Interrupt { path: p, time, tail, comms } => Assertion::Interrupt {
                path: path(p, f),
                time: f(time),
                tail: tail.map_body(|b| b.map_exprs(f)),
                comms: comms.iter().map(|c| map_comm_exprs(c, f)).collect(),
            },
            Assertion::InterruptInf { path: p, comms } => Assertion::InterruptInf {
                path: path(p, f),
                comms: comms.iter().map(|c| map_comm_exprs(c, f)).collect(),
            },
            Assertion::Io { ch, value, body } => {
                Assertion::Io { ch: ch.clone(), value: f(value), body: Box::new(body.map_exprs(f)) }
            }
            Assertion::Rec { var, base, step } => {
                Assertion::Rec { var: *var, base: Box::new(base.map_exprs(f)), step: Box::new(step.map_exprs(f)) }
            }
            Assertion::Sync { chs, left, right } => Assertion::sync(chs.clone(), left.map_exprs(f), right.map_exprs(f)),
        }
    }

    /// Visits every expression, as [`Assertion::map_exprs`] would.
    pub fn visit_exprs(&self, f: &mut dyn FnMut(&Expr)) {
        let _ = self.map_exprs(&mut |e| {
            f(e);
            e.clone()
        });
    }

    /// Binder variables introduced anywhere in the assertion.
    pub fn binders(&self) -> BTreeSet<BoundVar> {
        let mut out = BTreeSet::new();
        self.walk(&mut |a| match a {
            Assertion::WaitIn { body, .. } => {
                out.insert(body.d);
                out.insert(body.v);
            }
            Assertion::WaitOutv { body, .. } | Assertion::Wait { body, .. } => {
                out.insert(body.d);
            }
            Assertion::Interrupt { tail, comms, .. } => {
                out.insert(tail.d);
                comm_binders(comms, &mut out);
            }
            Assertion::InterruptInf { comms, .. } => comm_binders(comms, &mut out),
            _ => {}
        });
        out
    }

    /// Bound variables occurring free (path time excluded).
    pub fn free_bounds(&self) -> BTreeSet<BoundVar> {
        let mut all = BTreeSet::new();
        self.visit_exprs(&mut |e| all.extend(e.bounds()));
        let bound = self.binders();
        all.into_iter().filter(|b| !b.is_time() && !bound.contains(b)).collect()
    }

    /// Program variables mentioned anywhere (including substitution targets
    /// and path keys).
    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit_exprs(&mut |e| out.extend(e.vars()));
        self.walk(&mut |a| match a {
            Assertion::Guard(b, _) => out.extend(b.vars()),
            Assertion::Subst(_, sigma) => out.extend(sigma.iter().map(|(x, _)| x.clone())),
            Assertion::WaitIn { path, .. }
            | Assertion::WaitOutv { path, .. }
            | Assertion::Wait { path, .. }
            | Assertion::Interrupt { path, .. }
            | Assertion::InterruptInf { path, .. } => out.extend(path.map.keys().cloned()),
            _ => {}
        });
        out
    }

    /// Logical parameters mentioned anywhere.
    pub fn params(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit_exprs(&mut |e| out.extend(e.params()));
        self.walk(&mut |a| {
            if let Assertion::Guard(b, _) = a {
                out.extend(b.params());
            }
        });
        out
    }

    /// Substitutes free bound variables, renaming binders that would capture
    /// a variable of the images.
    pub fn subst_bound(&self, sigma: &BTreeMap<BoundVar, Expr>) -> Assertion {
        if sigma.is_empty() {
            return self.clone();
        }
        let captured: BTreeSet<BoundVar> = sigma.values().flat_map(|e| e.bounds()).collect();
        self.subst_bound_inner(sigma, &captured)
    }

    fn subst_bound_inner(&self, sigma: &BTreeMap<BoundVar, Expr>, risky: &BTreeSet<BoundVar>) -> Assertion {
        let path_sub = |p: &PathAssertion| p.subst_bound(sigma);
        match self {
            Assertion::True | Assertion::False | Assertion::Init | Assertion::Hole(_) => self.clone(),
            Assertion::And(a, b) => {
                Assertion::and(a.subst_bound_inner(sigma, risky), b.subst_bound_inner(sigma, risky))
            }
            Assertion::Or(a, b) => Assertion::or(a.subst_bound_inner(sigma, risky), b.subst_bound_inner(sigma, risky)),
            Assertion::Guard(b, p) => Assertion::guard(b.subst_bound(sigma), p.subst_bound_inner(sigma, risky)),
            Assertion::Subst(p, s) => Assertion::Subst(
                Box::new(p.subst_bound_inner(sigma, risky)),
                s.iter().map(|(x, e)| (x.clone(), e.subst_bound(sigma))).collect(),
            ),
            Assertion::WaitIn { path, ch, body } => {
                Assertion::WaitIn { path: path_sub(path), ch: ch.clone(), body: subst_binder2(body, sigma, risky) }
            }
            Assertion::WaitOutv { path, ch, value, body } => Assertion::WaitOutv {
                path: path_sub(path),
                ch: ch.clone(),
                value: value.subst_bound(sigma),
                body: subst_binder1(body, sigma, risky),
            },
            Assertion::Wait { path, time, body } => Assertion::Wait {
                path: path_sub(path),
                time: time.subst_bound(sigma),
                body: subst_binder1(body, sigma, risky),
            },
            Assertion::Interrupt { path, time, tail, comms } => Assertion::Interrupt {
                path: path_sub(path),
                time: time.subst_bound(sigma),
                tail: subst_binder1(tail, sigma, risky),
                comms: comms.iter().map(|c| subst_comm(c, sigma, risky)).collect(),
            },
            Assertion::InterruptInf { path, comms } => Assertion::InterruptInf {
                path: path_sub(path),
                comms: comms.iter().map(|c| subst_comm(c, sigma, risky)).collect(),
            },
            Assertion::Io { ch, value, body } => Assertion::Io {
                ch: ch.clone(),
                value: value.subst_bound(sigma),
                body: Box::new(body.subst_bound_inner(sigma, risky)),
            },
            Assertion::Rec { var, base, step } => Assertion::Rec {
                var: *var,
                base: Box::new(base.subst_bound_inner(sigma, risky)),
                step: Box::new(step.subst_bound_inner(sigma, risky)),
            },
            Assertion::Sync { chs, left, right } => Assertion::sync(
                chs.clone(),
                left.subst_bound_inner(sigma, risky),
                right.subst_bound_inner(sigma, risky),
            ),
        }
    }

    /// Substitutes logical parameters.
    pub fn subst_params(&self, sigma: &BTreeMap<String, Expr>) -> Assertion {
        self.map_exprs(&mut |e| e.subst_params(sigma))
    }

    /// Rebuilds the node with `f` applied to each immediate child.
    pub fn map_children(&self, f: &mut dyn FnMut(&Assertion) -> Assertion) -> Assertion {
        match self {
            Assertion::True | Assertion::False | Assertion::Init | Assertion::Hole(_) => self.clone(),
            Assertion::And(a, b) => Assertion::and(f(a), f(b)),
            Assertion::Or(a, b) => Assertion::or(f(a), f(b)),
            Assertion::Guard(b, p) => Assertion::guard(b.clone(), f(p)),
            Assertion::Subst(p, s) => Assertion::Subst(Box::new(f(p)), s.clone()),
            Assertion::WaitIn { path, ch, body } => {
                Assertion::WaitIn { path: path.clone(), ch: ch.clone(), body: body.map_body(|b| f(b)) }
            }
            Assertion::WaitOutv { path, ch, value, body } => Assertion::WaitOutv {
                path: path.clone(),
                ch: ch.clone(),
                value: value.clone(),
                body: body.map_body(|b| f(b)),
            },
            Assertion::Wait { path, time, body } => {
                Assertion::Wait { path: path.clone(), time: time.clone(), body: body.map_body(|b| f(b)) }
            }
            Assertion::Interrupt { path, time, tail, comms } => Assertion::Interrupt {
                path: path.clone(),
                time: time.clone(),
                tail: tail.map_body(|b| f(b)),
                comms: comms.iter().map(|c| map_comm_body(c, f)).collect(),
            },
            Assertion::InterruptInf { path, comms } => Assertion::InterruptInf {
                path: path.clone(),
                comms: comms.iter().map(|c| map_comm_body(c, f)).collect(),
            },
            Assertion::Io { ch, value, body } => {
                Assertion::Io { ch: ch.clone(), value: value.clone(), body: Box::new(f(body)) }
            }
            Assertion::Rec { var, base, step } => {
                Assertion::Rec { var: *var, base: Box::new(f(base)), step: Box::new(f(step)) }
            }
            Assertion::Sync { chs, left, right } => Assertion::sync(chs.clone(), f(left), f(right)),
        }
    }

    /// Renames program variables everywhere (used for process prefixing).
    pub fn rename_vars(&self, rn: &dyn Fn(&str) -> String) -> Assertion {
        match self {
            Assertion::True | Assertion::False | Assertion::Init | Assertion::Hole(_) => self.clone(),
            Assertion::Guard(b, p) => Assertion::guard(b.rename_vars(rn), p.rename_vars(rn)),
            Assertion::Subst(p, s) => Assertion::Subst(
                Box::new(p.rename_vars(rn)),
                s.iter().map(|(x, e)| (rn(x), e.rename_vars(rn))).collect(),
            ),
            Assertion::WaitIn { path, ch, body } => Assertion::WaitIn {
                path: path.rename_vars(rn),
                ch: ch.clone(),
                body: body.map_body(|b| b.rename_vars(rn)),
            },
            Assertion::WaitOutv { path, ch, value, body } => Assertion::WaitOutv {
                path: path.rename_vars(rn),
                ch: ch.clone(),
                value: value.rename_vars(rn),
                body: body.map_body(|b| b.rename_vars(rn)),
            },
            Assertion::Wait { path, time, body } => Assertion::Wait {
                path: path.rename_vars(rn),
                time: time.rename_vars(rn),
                body: body.map_body(|b| b.rename_vars(rn)),
            },
            Assertion::Interrupt { path, time, tail, comms } => Assertion::Interrupt {
                path: path.rename_vars(rn),
                time: time.rename_vars(rn),
                tail: tail.map_body(|b| b.rename_vars(rn)),
                comms: comms.iter().map(|c| rename_comm(c, rn)).collect(),
            },
            Assertion::InterruptInf { path, comms } => Assertion::InterruptInf {
                path: path.rename_vars(rn),
                comms: comms.iter().map(|c| rename_comm(c, rn)).collect(),
            },
            Assertion::Io { ch, value, body } => {
                Assertion::Io { ch: ch.clone(), value: value.rename_vars(rn), body: Box::new(body.rename_vars(rn)) }
            }
            _ => self.map_children(&mut |c| c.rename_vars(rn)),
        }
    }

    /// Replaces `Hole(var)` by `with`.
    pub fn fill_hole(&self, var: RecVar, with: &Assertion) -> Assertion {
        match self {
            Assertion::Hole(r) if *r == var => with.clone(),
            _ => self.map_children(&mut |c| c.fill_hole(var, with)),
        }
    }

    /// `F^n(P)` for `rec R. P ∨ F(R)`; `None` for other nodes.
    pub fn unfold(&self, n: usize) -> Option<Assertion> {
        let Assertion::Rec { var, base, step } = self else { return None };
        let mut acc = (**base).clone();
        for _ in 0..n {
            acc = step.fill_hole(*var, &acc);
        }
        Some(acc)
    }

    /// Number of leaves of the disjunction/guard/substitution skeleton that
    /// are not `False`. A leaf is any node other than `Or`, `Guard`, `Subst`.
    pub fn live_leaves(&self) -> usize {
        match self {
            Assertion::Or(a, b) => a.live_leaves() + b.live_leaves(),
            Assertion::Guard(_, p) | Assertion::Subst(p, _) => p.live_leaves(),
            Assertion::False => 0,
            _ => 1,
        }
    }

    pub fn pretty(&self) -> String {
        pretty::assertion(self)
    }
}

impl std::fmt::Display for Assertion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.pretty())
    }
}

impl std::fmt::Display for PathAssertion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&pretty::path(self))
    }
}

fn comm_body(c: &CommSpec) -> &Assertion {
    match c {
        CommSpec::In { body, .. } => &body.body,
        CommSpec::Out { body, .. } => &body.body,
    }
}

fn comm_binders(comms: &[CommSpec], out: &mut BTreeSet<BoundVar>) {
    for c in comms {
        match c {
            CommSpec::In { body, .. } => {
                out.insert(body.d);
                out.insert(body.v);
            }
            CommSpec::Out { value, body, .. } => {
                out.insert(value.d);
                out.insert(body.d);
            }
        }
    }
}

fn map_comm_exprs(c: &CommSpec, f: &mut dyn FnMut(&Expr) -> Expr) -> CommSpec {
    match c {
        CommSpec::In { ch, body } => CommSpec::In { ch: ch.clone(), body: body.map_body(|b| b.map_exprs(f)) },
        CommSpec::Out { ch, value, body } => CommSpec::Out {
            ch: ch.clone(),
            value: ExprBinder { d: value.d, expr: f(&value.expr) },
            body: body.map_body(|b| b.map_exprs(f)),
        },
    }
}

fn map_comm_body(c: &CommSpec, f: &mut dyn FnMut(&Assertion) -> Assertion) -> CommSpec {
    match c {
        CommSpec::In { ch, body } => CommSpec::In { ch: ch.clone(), body: body.map_body(|b| f(b)) },
        CommSpec::Out { ch, value, body } => {
            CommSpec::Out { ch: ch.clone(), value: value.clone(), body: body.map_body(|b| f(b)) }
        }
    }
}

fn rename_comm(c: &CommSpec, rn: &dyn Fn(&str) -> String) -> CommSpec {
    match c {
        CommSpec::In { ch, body } => CommSpec::In { ch: ch.clone(), body: body.map_body(|b| b.rename_vars(rn)) },
        CommSpec::Out { ch, value, body } => CommSpec::Out {
            ch: ch.clone(),
            value: ExprBinder { d: value.d, expr: value.expr.rename_vars(rn) },
            body: body.map_body(|b| b.rename_vars(rn)),
        },
    }
}

fn rebind(
    b: BoundVar,
    sigma: &BTreeMap<BoundVar, Expr>,
    risky: &BTreeSet<BoundVar>,
) -> (BoundVar, BTreeMap<BoundVar, Expr>) {
    let mut inner: BTreeMap<BoundVar, Expr> = sigma.clone();
    inner.remove(&b);
    if risky.contains(&b) {
        let nb = BoundVar::fresh(b.kind);
        inner.insert(b, Expr::Bound(nb));
        (nb, inner)
    } else {
        (b, inner)
    }
}

fn subst_binder1(b: &Binder1, sigma: &BTreeMap<BoundVar, Expr>, risky: &BTreeSet<BoundVar>) -> Binder1 {
    let (d, inner) = rebind(b.d, sigma, risky);
    Binder1 { d, body: Box::new(b.body.subst_bound_inner(&inner, risky)) }
}

fn subst_binder2(b: &Binder2, sigma: &BTreeMap<BoundVar, Expr>, risky: &BTreeSet<BoundVar>) -> Binder2 {
    let (d, inner) = rebind(b.d, sigma, risky);
    let (v, inner) = rebind(b.v, &inner, risky);
    Binder2 { d, v, body: Box::new(b.body.subst_bound_inner(&inner, risky)) }
}

fn subst_comm(c: &CommSpec, sigma: &BTreeMap<BoundVar, Expr>, risky: &BTreeSet<BoundVar>) -> CommSpec {
    match c {
        CommSpec::In { ch, body } => CommSpec::In { ch: ch.clone(), body: subst_binder2(body, sigma, risky) },
        CommSpec::Out { ch, value, body } => {
            let (vd, vinner) = rebind(value.d, sigma, risky);
            CommSpec::Out {
                ch: ch.clone(),
                value: ExprBinder { d: vd, expr: value.expr.subst_bound(&vinner) },
                body: subst_binder1(body, sigma, risky),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rdy_heads() {
        let cm = vec![
            CommSpec::In { ch: "ch".into(), body: Binder2::new(|_, _| Assertion::Init) },
            CommSpec::Out {
                ch: "ch1".into(),
                value: ExprBinder::constant(Expr::var("v")),
                body: Binder1::constant(Assertion::Init),
            },
        ];
        let r: Vec<_> = rdy(&cm).into_iter().collect();
        assert_eq!(r, vec![("ch".to_string(), Dir::In), ("ch1".to_string(), Dir::Out)]);
    }

    #[test]
    fn capture_avoiding_bound_substitution() {
        // {d' => init[x := d + d']} with d := d' must rename the binder.
        let outer = BoundVar::fresh(BoundKind::Delay);
        let b = Binder1::new(|dp| Assertion::subst(Assertion::Init, "x", Expr::Bound(outer) + dp.clone()));
        let inner = b.d;
        let a = Assertion::Wait { path: PathAssertion::id(), time: Expr::int(1), body: b };
        let r = a.subst_bound(&BTreeMap::from([(outer, Expr::Bound(inner))]));
        let Assertion::Wait { body, .. } = &r else { panic!() };
        assert_ne!(body.d, inner);
        let Assertion::Subst(_, s) = &*body.body else { panic!() };
        assert!(s[0].1.equiv(&(Expr::Bound(inner) + Expr::Bound(body.d))));
    }

    #[test]
    fn path_operations() {
        let p = PathAssertion::solution(BTreeMap::from([("x".to_string(), Expr::var("x") + Expr::time())]));
        assert_eq!(p.to_string(), "s = s0[x ↦ x+t]");
        assert!(PathAssertion::solution(BTreeMap::from([("x".to_string(), Expr::var("x"))])).is_id());
        let d = Expr::int(2);
        assert_eq!(p.delayed(&d).to_string(), "s = s0[x ↦ 2+x+t]");
        let s = PathAssertion::id().subst(&BTreeMap::from([("x".to_string(), Expr::int(3))]));
        assert_eq!(s.to_string(), "s = s0[x ↦ 3]");
        assert!(p.merge(&p).is_err());
    }

    #[test]
    fn unfold_and_leaves() {
        let r = RecVar::fresh();
        let rec = Assertion::Rec {
            var: r,
            base: Box::new(Assertion::Init),
            step: Box::new(Assertion::subst(Assertion::Hole(r), "x", Expr::var("x") + Expr::int(1))),
        };
        let two = rec.unfold(2).unwrap();
        assert_eq!(two.to_string(), "init[x := x+1][x := x+1]");
        let d = Assertion::or(Assertion::guard(BExpr::True, Assertion::Init), Assertion::False);
        assert_eq!(d.live_leaves(), 1);
    }
}
