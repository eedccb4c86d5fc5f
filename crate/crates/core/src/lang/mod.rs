//! HCSP abstract syntax, text parser and pretty-printer.
//!
//! The concrete grammar is documented in `docs/grammar.md` at the repository root.

mod lexer;
mod parser;
mod pretty;

use std::collections::BTreeSet;

use crate::expr::{BExpr, Expr};

pub use parser::{parse, parse_bexpr, parse_expr, ParseError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ode {
    /// `(x, rhs)` for `x_dot = rhs`.
    pub eqs: Vec<(String, Expr)>,
    pub domain: BExpr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CommBranch {
    Input { ch: String, var: String, cont: Process },
    Output { ch: String, value: Expr, cont: Process },
}

impl CommBranch {
    pub fn channel(&self) -> &str {
        match self {
            CommBranch::Input { ch, .. } | CommBranch::Output { ch, .. } => ch,
        }
    }

    pub fn cont(&self) -> &Process {
        match self {
            CommBranch::Input { cont, .. } | CommBranch::Output { cont, .. } => cont,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Process {
    Skip,
    Assign(String, Expr),
    Input(String, String),
    Output(String, Expr),
    IChoice(Box<Process>, Box<Process>),
    Seq(Box<Process>, Box<Process>),
    Repeat(Box<Process>),
    Cond(BExpr, Box<Process>, Box<Process>),
    Ode(Ode),
    Wait(Expr),
    Interrupt { ode: Ode, tail: Box<Process>, branches: Vec<CommBranch> },
    Parallel(Box<Process>, BTreeSet<String>, Box<Process>),
}

impl Process {
    pub fn seq(a: Process, b: Process) -> Process {
        Process::Seq(Box::new(a), Box::new(b))
    }

    pub fn choice(a: Process, b: Process) -> Process {
        Process::IChoice(Box::new(a), Box::new(b))
    }

    pub fn repeat(a: Process) -> Process {
        Process::Repeat(Box::new(a))
    }

    pub fn cond(b: BExpr, c1: Process, c2: Process) -> Process {
        Process::Cond(b, Box::new(c1), Box::new(c2))
    }

    pub fn is_parallel(&self) -> bool {
        matches!(self, Process::Parallel(..))
    }

    /// True when no `Parallel` occurs anywhere in the tree.
    pub fn is_sequential(&self) -> bool {
        let mut seq = true;
        self.walk(&mut |p| seq &= !p.is_parallel());
        seq
    }

    /// Pre-order traversal over every sub-process.
    pub fn walk(&self, f: &mut dyn FnMut(&Process)) {
        f(self);
        match self {
            Process::IChoice(a, b) | Process::Seq(a, b) | Process::Cond(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
            Process::Parallel(a, _, b) => {
                a.walk(f);
                b.walk(f);
            }
            Process::Repeat(a) => a.walk(f),
            Process::Interrupt { tail, branches, .. } => {
                tail.walk(f);
                for br in branches {
                    br.cont().walk(f);
                }
            }
            _ => {}
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let ode_vars = |ode: &Ode, out: &mut BTreeSet<String>| {
            for (x, e) in &ode.eqs {
                out.insert(x.clone());
                out.extend(e.vars());
            }
            out.extend(ode.domain.vars());
        };
        self.walk(&mut |p| match p {
            Process::Assign(x, e) => {
                out.insert(x.clone());
                out.extend(e.vars());
            }
            Process::Input(_, x) => {
                out.insert(x.clone());
            }
            Process::Output(_, e) | Process::Wait(e) => out.extend(e.vars()),
            Process::Cond(b, ..) => out.extend(b.vars()),
            Process::Ode(ode) => ode_vars(ode, &mut out),
            Process::Interrupt { ode, branches, .. } => {
                ode_vars(ode, &mut out);
                for br in branches {
                    match br {
                        CommBranch::Input { var, .. } => {
                            out.insert(var.clone());
                        }
                        CommBranch::Output { value, .. } => out.extend(value.vars()),
                    }
                }
            }
            _ => {}
        });
        out
    }

    pub fn channels(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.walk(&mut |p| match p {
            Process::Input(ch, _) | Process::Output(ch, _) => {
                out.insert(ch.clone());
            }
            Process::Interrupt { branches, .. } => {
                out.extend(branches.iter().map(|b| b.channel().to_string()));
            }
            Process::Parallel(_, chs, _) => out.extend(chs.iter().cloned()),
            _ => {}
        });
        out
    }

    /// Renames every program variable (assignment targets, input variables,
    /// ODE variables and expression occurrences).
    pub fn rename_vars(&self, rn: &dyn Fn(&str) -> String) -> Process {
        let ode = |o: &Ode| Ode {
            eqs: o.eqs.iter().map(|(x, e)| (rn(x), e.rename_vars(rn))).collect(),
            domain: o.domain.rename_vars(rn),
        };
        let bx = |p: &Process| Box::new(p.rename_vars(rn));
        match self {
            Process::Skip => Process::Skip,
            Process::Assign(x, e) => Process::Assign(rn(x), e.rename_vars(rn)),
            Process::Input(ch, x) => Process::Input(ch.clone(), rn(x)),
            Process::Output(ch, e) => Process::Output(ch.clone(), e.rename_vars(rn)),
            Process::IChoice(a, b) => Process::IChoice(bx(a), bx(b)),
            Process::Seq(a, b) => Process::Seq(bx(a), bx(b)),
            Process::Repeat(a) => Process::Repeat(bx(a)),
            Process::Cond(b, x, y) => Process::Cond(b.rename_vars(rn), bx(x), bx(y)),
            Process::Ode(o) => Process::Ode(ode(o)),
            Process::Wait(e) => Process::Wait(e.rename_vars(rn)),
            Process::Interrupt { ode: o, tail, branches } => Process::Interrupt {
                ode: ode(o),
                tail: bx(tail),
                branches: branches
                    .iter()
                    .map(|br| match br {
                        CommBranch::Input { ch, var, cont } => {
                            CommBranch::Input { ch: ch.clone(), var: rn(var), cont: cont.rename_vars(rn) }
                        }
                        CommBranch::Output { ch, value, cont } => CommBranch::Output {
                            ch: ch.clone(),
                            value: value.rename_vars(rn),
                            cont: cont.rename_vars(rn),
                        },
                    })
                    .collect(),
            },
            Process::Parallel(a, chs, b) => Process::Parallel(bx(a), chs.clone(), bx(b)),
        }
    }

    pub fn pretty(&self) -> String {
        pretty::process(self)
    }
}

impl std::fmt::Display for Process {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.pretty())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const PLANT: &str = "ch1!v; ch2!p; (ch3?a; <p_dot=v, v_dot=a & true |> skip> |> [] (ch1!v -> ch2!p))*";

    #[test]
    fn plant_channels_and_vars() {
        let p = parse(PLANT).unwrap();
        let chs: Vec<_> = p.channels().into_iter().collect();
        assert_eq!(chs, ["ch1", "ch2", "ch3"]);
        let vs: Vec<_> = p.free_vars().into_iter().collect();
        assert_eq!(vs, ["a", "p", "v"]);
        assert!(Process::Skip.free_vars().is_empty());
    }
}
