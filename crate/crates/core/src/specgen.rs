//! Specification generation for sequential processes.
//!
//! Generation is continuation-passing: the assertion of `c; rest` is built
//! from the already generated assertion of `rest`, starting from `init` for
//! the empty continuation.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::assertion::{normalize, Assertion, Binder1, Binder2, CommSpec, ExprBinder, PathAssertion, RecVar};
use crate::expr::{BExpr, Expr};
use crate::lang::{CommBranch, Ode, Process};
use crate::obligation::{Obligation, ObligationKind};
use crate::ode::{self, Boundary, OdeError, OdeSolution};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecError {
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error("ODE `{0}` has no unique solution")]
    NotLipschitz(String),
    #[error("parallel composition inside a sequential process: {0}")]
    Parallel(String),
}

/// A boundary-time parameter `tᵢ` and the constraint that defines it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FreshVar {
    pub name: String,
    pub constraint: BExpr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecResult {
    pub assertion: Assertion,
    pub obligations: Vec<Obligation>,
    pub fresh_vars: Vec<FreshVar>,
}

/// Generates the specification of a sequential process.
pub fn generate(c: &Process) -> Result<SpecResult, SpecError> {
    let mut g = Generator::new();
    let assertion = g.generate(c)?;
    Ok(g.finish(assertion))
}

/// Stateful generator; one instance numbers the boundary parameters of all
/// processes of a job consecutively.
#[derive(Debug, Default)]
pub struct Generator {
    next_time: usize,
    obligations: Vec<Obligation>,
    fresh_vars: Vec<FreshVar>,
}

impl Generator {
    pub fn new() -> Generator {
        Generator::default()
    }

    /// `generate(c; skip)`, normalized.
    pub fn generate(&mut self, c: &Process) -> Result<Assertion, SpecError> {
        Ok(normalize(&self.gen(c, Assertion::Init)?))
    }

    /// Moves the collected obligations and parameters into a result.
    pub fn finish(&mut self, assertion: Assertion) -> SpecResult {
        SpecResult {
            assertion,
            obligations: std::mem::take(&mut self.obligations),
            fresh_vars: std::mem::take(&mut self.fresh_vars),
        }
    }

    pub fn fresh_vars(&self) -> &[FreshVar] {
        &self.fresh_vars
    }

    fn fresh_time(&mut self) -> String {
        self.next_time += 1;
        format!("t{}", self.next_time)
    }

    /// Assertion of `c; k'` where `k` is the assertion of `k'`.
    pub fn gen(&mut self, c: &Process, k: Assertion) -> Result<Assertion, SpecError> {
        Ok(match c {
            Process::Skip => k,
            Process::Assign(x, e) => Assertion::subst(k, x, e.clone()),
            Process::Input(ch, x) => Assertion::WaitIn {
                path: PathAssertion::id(),
                ch: ch.clone(),
                body: Binder2::new(|_, v| Assertion::subst(k, x, v.clone())),
            },
            Process::Output(ch, e) => Assertion::WaitOutv {
                path: PathAssertion::id(),
                ch: ch.clone(),
                value: e.clone(),
                body: Binder1::constant(k),
            },
            Process::Wait(e) => {
                Assertion::Wait { path: PathAssertion::id(), time: e.clone(), body: Binder1::constant(k) }
            }
            Process::Seq(a, b) => {
                let rest = self.gen(b, k)?;
                self.gen(a, rest)?
            }
            Process::Cond(b, p, q) => {
                let pa = self.gen(p, k.clone())?;
                let qa = self.gen(q, k)?;
                Assertion::or(Assertion::guard(b.clone(), pa), Assertion::guard(BExpr::not(b.clone()), qa))
            }
            Process::IChoice(p, q) => {
                let pa = self.gen(p, k.clone())?;
                Assertion::or(pa, self.gen(q, k)?)
            }
            Process::Repeat(body) => {
                let var = RecVar::fresh();
                let step = self.loop_functional(body, var)?;
                Assertion::Rec { var, base: Box::new(k), step: Box::new(step) }
            }
            Process::Ode(o) => self.gen_ode(o, k)?,
            Process::Interrupt { ode, tail, branches } => {
                let tail_a = self.gen(tail, k.clone())?;
                let mut qs = Vec::with_capacity(branches.len());
                for br in branches {
                    qs.push(self.gen(br.cont(), k.clone())?);
                }
                self.gen_interrupt(ode, tail_a, branches, qs)?
            }
            Process::Parallel(..) => return Err(SpecError::Parallel(c.pretty())),
        })
    }

    /// `F(R)`: the body's assertion with the hole `R` as continuation.
    pub fn loop_functional(&mut self, body: &Process, var: RecVar) -> Result<Assertion, SpecError> {
        self.gen(body, Assertion::Hole(var))
    }

    fn solve(&self, o: &Ode) -> Result<OdeSolution, SpecError> {
        if !ode::check_lipschitz(&o.eqs) {
            return Err(SpecError::NotLipschitz(ode_text(o)));
        }
        Ok(ode::solve(&o.eqs)?)
    }

    fn boundary(&mut self, sol: &OdeSolution, o: &Ode) -> Boundary {
        let mut names = Vec::new();
        let b = ode::boundary(sol, &o.domain, &mut || {
            let n = self.next_time + 1 + names.len();
            names.push(n);
            format!("t{n}")
        });
        self.next_time += names.len();
        b
    }

    /// Registers a boundary parameter: explicit boundaries define `tᵢ` by an
    /// equation, implicit ones by their constraint plus a least-crossing
    /// obligation.
    fn time_param(&mut self, b: &Boundary, o: &Ode) -> Option<(String, BExpr)> {
        match b {
            Boundary::Explicit { time } => {
                let name = self.fresh_time();
                let c = BExpr::eq(Expr::param(&name), time.clone());
                self.fresh_vars.push(FreshVar { name: name.clone(), constraint: c.clone() });
                Some((name, c))
            }
            Boundary::Implicit { param, constraint, least_hyp, least_goal } => {
                self.fresh_vars.push(FreshVar { name: param.clone(), constraint: constraint.clone() });
                self.obligations.push(Obligation::new(
                    ObligationKind::LeastCrossing,
                    format!("{param} is the first exit of {}", ode_text(o)),
                    least_hyp.clone(),
                    least_goal.clone(),
                ));
                Some((param.clone(), constraint.clone()))
            }
            _ => None,
        }
    }

    fn gen_ode(&mut self, o: &Ode, k: Assertion) -> Result<Assertion, SpecError> {
        let sol = self.solve(o)?;
        let path = PathAssertion::solution(sol.solution.clone());
        let after = |k: &Assertion| Binder1::new(|d| Assertion::subst_many(k.clone(), sigma(&sol, d)));
        let b = self.boundary(&sol, o);
        Ok(match &b {
            Boundary::Infinite => Assertion::False,
            Boundary::ZeroOrInfinite { holds_initially } => Assertion::or(
                Assertion::guard(
                    BExpr::not(holds_initially.clone()),
                    Assertion::Wait { path, time: Expr::zero(), body: after(&k) },
                ),
                Assertion::guard(holds_initially.clone(), Assertion::False),
            ),
            Boundary::Explicit { .. } | Boundary::Implicit { .. } => {
                let (name, c) = self.time_param(&b, o).expect("finite boundary");
                Assertion::guard(c, Assertion::Wait { path, time: Expr::param(&name), body: after(&k) })
            }
        })
    }

    fn gen_interrupt(
        &mut self,
        o: &Ode,
        tail: Assertion,
        branches: &[CommBranch],
        qs: Vec<Assertion>,
    ) -> Result<Assertion, SpecError> {
        let sol = self.solve(o)?;
        let path = PathAssertion::solution(sol.solution.clone());
        let comms = rel_cm(branches, qs, &sol);
        let after = || Binder1::new(|d| Assertion::subst_many(tail.clone(), sigma(&sol, d)));
        let b = self.boundary(&sol, o);
        Ok(match &b {
            Boundary::Infinite => Assertion::InterruptInf { path, comms },
            Boundary::ZeroOrInfinite { holds_initially } => Assertion::or(
                Assertion::guard(
                    BExpr::not(holds_initially.clone()),
                    Assertion::Interrupt {
                        path: path.clone(),
                        time: Expr::zero(),
                        tail: after(),
                        comms: comms.clone(),
                    },
                ),
                Assertion::guard(holds_initially.clone(), Assertion::InterruptInf { path, comms }),
            ),
            Boundary::Explicit { .. } | Boundary::Implicit { .. } => {
                let (name, c) = self.time_param(&b, o).expect("finite boundary");
                Assertion::guard(c, Assertion::Interrupt { path, time: Expr::param(&name), tail: after(), comms })
            }
        })
    }
}

/// `[x⃗ := p⃗(s0, d)]`.
fn sigma(sol: &OdeSolution, d: &Expr) -> Vec<(String, Expr)> {
    sol.at(d).into_iter().collect()
}

/// Communication list of an interrupt whose branch continuations have
/// assertions `qs`, evaluated at the point the ODE is left.
pub fn rel_cm(branches: &[CommBranch], qs: Vec<Assertion>, sol: &OdeSolution) -> Vec<CommSpec> {
    branches
        .iter()
        .zip(qs)
        .map(|(br, q)| match br {
            CommBranch::Input { ch, var, .. } => CommSpec::In {
                ch: ch.clone(),
                body: Binder2::new(|d, v| Assertion::subst_many(Assertion::subst(q, var, v.clone()), sigma(sol, d))),
            },
            CommBranch::Output { ch, value, .. } => {
                let value = ExprBinder::new(|d| {
                    let at: BTreeMap<String, Expr> = sol.at(d);
                    value.subst_vars(&at).simplify()
                });
                CommSpec::Out { ch: ch.clone(), value, body: Binder1::new(|d| Assertion::subst_many(q, sigma(sol, d))) }
            }
        })
        .collect()
}

fn ode_text(o: &Ode) -> String {
    Process::Ode(o.clone()).pretty()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;

    fn spec(src: &str) -> SpecResult {
        generate(&parse(src).unwrap()).unwrap()
    }

    #[test]
    fn standalone_forms() {
        assert_eq!(spec("skip").assertion.pretty(), "init");
        assert_eq!(spec("ch?x").assertion.pretty(), "wait_in(id_inv, ch, {(d, v) => init[x := v]})");
        assert_eq!(spec("ch!x+1").assertion.pretty(), "wait_outv(id_inv, ch, 1+x, {d => init})");
        assert_eq!(spec("x := 1; y := x").assertion.pretty(), "init[y := 1, x := 1]");
    }

    #[test]
    fn ode_with_explicit_boundary() {
        let r = spec("<x_dot = 1 & x < 5>");
        assert_eq!(r.assertion.pretty(), "↑(t1 == 5-x) ∧ wait(s = s0[x ↦ x+t], t1, {d => init[x := x+d]})");
        assert_eq!(r.fresh_vars.len(), 1);
        assert_eq!(r.fresh_vars[0].name, "t1");
        assert!(r.obligations.is_empty());
    }

    #[test]
    fn boundary_parameters_are_numbered_per_generator() {
        let r = spec("<x_dot = 1 & x < 5>; <x_dot = 1 & x < 7>");
        let names: Vec<_> = r.fresh_vars.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, ["t1", "t2"]);
        let params = r.assertion.params();
        assert!(params.contains("t1") && params.contains("t2"));
    }

    #[test]
    fn implicit_boundary_emits_least_crossing() {
        let r = spec("<x_dot = 1 & x < 5 && x > 0>");
        assert_eq!(r.obligations.len(), 1);
        assert_eq!(r.obligations[0].kind, ObligationKind::LeastCrossing);
        assert_eq!(r.fresh_vars[0].name, "t1");
    }

    #[test]
    fn choice_conditional_and_parallel() {
        assert_eq!(spec("x := 1 $ x := 2").assertion.pretty(), "init[x := 1] ∨ init[x := 2]");
        assert_eq!(
            spec("if x > 0 then y := 1 else skip endif").assertion.pretty(),
            "(↑(x > 0) ∧ init[y := 1]) ∨ (↑(!(x > 0)) ∧ init)"
        );
        assert!(matches!(generate(&parse("a!1 ||[a] a?x").unwrap()), Err(SpecError::Parallel(_))));
    }

    #[test]
    fn repetition_is_rec() {
        let r = spec("(x := x+1)*");
        assert_eq!(r.assertion.pretty(), "rec R1. (init) ∨ (R1[x := 1+x])");
        let r = spec("(skip)*; y := 0");
        assert_eq!(r.assertion.pretty(), "rec R1. (init[y := 0]) ∨ (R1)");
    }

    #[test]
    fn interrupt_output_branch_follows_solution() {
        let r = spec("<p_dot = v, v_dot = a & true |> skip> |> [] (ch1!v -> skip)");
        let Assertion::InterruptInf { path, comms } = &r.assertion else { panic!("{}", r.assertion.pretty()) };
        assert_eq!(path.map["p"].to_string(), "p+v*t+0.5*a*t^2");
        let CommSpec::Out { ch, value, .. } = &comms[0] else { panic!() };
        assert_eq!(ch, "ch1");
        assert_eq!(value.apply(&Expr::int(2)).simplify().to_string(), "2*a+v");
    }

    #[test]
    fn empty_comm_list_gives_plain_wait() {
        let Process::Ode(ode) = parse("<x_dot = 1 & x < 5>").unwrap() else { panic!() };
        let c = Process::Interrupt { ode, tail: Box::new(Process::Skip), branches: vec![] };
        let r = generate(&c).unwrap();
        assert_eq!(r.assertion.pretty(), "↑(t1 == 5-x) ∧ wait(s = s0[x ↦ x+t], t1, {d => init[x := x+d]})");
    }
}
